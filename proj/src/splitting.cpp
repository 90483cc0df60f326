#include "pwh/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pwh/errors.hpp"
#include "pwh/scales.hpp"

namespace pwh {

TangentVector Splitting::to_frame(const TangentVector& v) const {
    // Cramer's rule on [e_u e_s] c = v.
    const double det = e_u.cross(e_s);
    return {v.cross(e_s) / det, e_u.cross(v) / det};
}

namespace {

void check_in_domain(const SystemSpec& sys, const Point& y) {
    if (boundary_dist_or_zero(y, sys.domain()) <= 0.0) {
        fail(ErrorCode::OrbitLeavesDomain, "orbit reaches excluded point " + to_string(y));
    }
}

// Sign convention only: orient like the cat-map eigenvector so neighbouring frames agree.
TangentVector orient(TangentVector d, const TangentVector& ref) { return d.dot(ref) < 0.0 ? -d : d; }

Mat2 renormalized(const Mat2& m) {
    const double s = m.max_abs_entry();
    return s > 0.0 ? (1.0 / s) * m : m;
}

struct DirectionResult {
    TangentVector dir;
    Mat2 first_jacobian;  // derivative of the one-step map used at x itself
    int iterations = 0;
};

// Direction of lim M_k v with M_k = D(x_1) ... D(x_k), x_k the k-th iterate of `step`.
// `step(y)` returns the next point and the derivative at y of the step map; the
// factor appended to M is the inverse of that derivative, i.e. the map from x_k to x_{k-1}.
// Two start vectors on either side of `ref` bracket the limit; their images must agree.
// A single start is not enough: `ref` is exactly invariant wherever f is the cat map,
// so its image would stall until the orbit reaches a region where f differs.
template <class StepFn>
DirectionResult limit_direction(const SystemSpec& sys, const Point& x, const TangentVector& ref,
                                const TangentVector& other, int n_iters, StepFn&& step) {
    const TangentVector v1 = ref + 0.5 * other;
    const TangentVector v2 = ref - 0.5 * other;
    Mat2 M = Mat2::identity();
    Point y = x;
    DirectionResult out{ref, Mat2::identity(), 0};
    for (int k = 1; k <= n_iters; ++k) {
        const MapStep s = step(y);
        if (k == 1) out.first_jacobian = s.jacobian;
        y = s.image;
        check_in_domain(sys, y);
        M = renormalized(M * s.jacobian.inverse());
        const TangentVector d1 = (M * v1).normalized();
        const TangentVector d2 = (M * v2).normalized();
        if (k >= 2 && std::abs(d1.cross(d2)) < kSplittingTol) {
            out.dir = (d1 + d2).normalized();
            out.iterations = k;
            return out;
        }
    }
    fail(ErrorCode::NoConvergence, "splitting at " + to_string(x) + " after " + std::to_string(n_iters) + " steps");
}

}  // namespace

Splitting compute_splitting(const SystemSpec& sys, const Point& x, int n_iters) {
    boundary_dist(x, sys.domain());
    const CatEigen& ce = cat_eigen();
    // Power iteration started from the cat-map eigenvectors: exact for the linear map and a
    // good start for perturbations of it. For inverse systems the roles of the two swap.
    const Mat2 df0 = sys.jacobian(x);
    const bool swapped = (df0 * ce.e_s).norm() > (df0 * ce.e_u).norm();
    const TangentVector ref_u = swapped ? ce.e_s : ce.e_u;
    const TangentVector ref_s = swapped ? ce.e_u : ce.e_s;
    const DirectionResult u = limit_direction(sys, x, ref_u, ref_s, n_iters,
                                              [&](const Point& y) { return sys.backward_step(y); });
    const DirectionResult s = limit_direction(sys, x, ref_s, ref_u, n_iters,
                                              [&](const Point& y) { return sys.forward_step(y); });
    Splitting out;
    out.e_u = orient(u.dir, ref_u);
    out.e_s = orient(s.dir, ref_s);
    out.iterations_u = u.iterations;
    out.iterations_s = s.iterations;
    if (out.frame_det() < kMinFrameDet) {
        fail(ErrorCode::DegenerateFrame, "|det| = " + std::to_string(out.frame_det()) + " at " + to_string(x));
    }
    const Mat2& df = s.first_jacobian;     // Df(x)
    const Mat2& dfinv = u.first_jacobian;  // Df^{-1}(x)
    out.m_u = (df * out.e_u).norm();
    out.n_s = (df * out.e_s).norm();
    out.m_s_inv = (dfinv * out.e_s).norm();
    out.n_u_inv = (dfinv * out.e_u).norm();
    if (!(out.m_u > 1.0 && out.n_s < 1.0)) {
        fail(ErrorCode::NotHyperbolic, "rates m_u=" + std::to_string(out.m_u) + " n_s=" + std::to_string(out.n_s) +
                                           " at " + to_string(x));
    }
    return out;
}

ConeApertures cone_aperture(const Splitting& split, double eps_eps) {
    const double num_u = split.m_u - eps_eps - 1.0;
    const double num_s = split.m_s_inv - eps_eps - 1.0;
    if (!(num_u > 0.0) || !(num_s > 0.0)) {
        fail(ErrorCode::NonpositiveAperture, "eps eps(x) = " + std::to_string(eps_eps) + " exceeds the rate margin");
    }
    return {std::min(1.0, num_u / (split.n_s + eps_eps + 1.0)),
            std::min(1.0, num_s / (split.n_u_inv + eps_eps + 1.0))};
}

ConeFamily::ConeFamily(SystemSpec f, const ScaleParams& scales, int n_iters)
    : f_(std::move(f)), scales_(scales), n_iters_(n_iters) {}

ConeFamily::At ConeFamily::at(const Point& x) const {
    At out;
    out.frame = compute_splitting(f_, x, n_iters_);
    out.eps_eps = eps_eps_at(scales_, f_, x);
    out.kappa = cone_aperture(out.frame, out.eps_eps);
    return out;
}

namespace {

double sample_t(int i, int n_dirs) { return n_dirs < 2 ? 1.0 : -1.0 + 2.0 * i / (n_dirs - 1); }

}  // namespace

ConeCheck cone_invariance_check(const SystemSpec& g, const ConeFamily& cones, const Point& x, int n_dirs) {
    const ConeFamily::At cx = cones.at(x);
    const MapStep step = g.forward_step(x);
    const ConeFamily::At cgx = cones.at(step.image);
    const Mat2 dginv = step.jacobian.inverse();
    double worst_u = 0.0, worst_s = 0.0;
    for (int i = 0; i < n_dirs; ++i) {
        const double t = sample_t(i, n_dirs);
        const TangentVector wu = cgx.frame.to_frame(step.jacobian * cx.frame.from_frame(1.0, cx.kappa.kappa_u * t));
        worst_u = std::max(worst_u, std::abs(wu.b) / (cgx.kappa.kappa_u * std::abs(wu.a)));
        const TangentVector ws = cx.frame.to_frame(dginv * cgx.frame.from_frame(cgx.kappa.kappa_s * t, 1.0));
        worst_s = std::max(worst_s, std::abs(ws.a) / (cx.kappa.kappa_s * std::abs(ws.b)));
    }
    ConeCheck out;
    out.margin_u = 1.0 - worst_u;
    out.margin_s = 1.0 - worst_s;
    out.pass = out.margin_u > 0.0 && out.margin_s > 0.0;
    return out;
}

GrowthCheck cone_growth_check(const SystemSpec& g, const ConeFamily& cones, const Point& x, int n_dirs) {
    const ConeFamily::At cx = cones.at(x);
    const MapStep step = g.forward_step(x);
    const ConeFamily::At cgx = cones.at(step.image);
    const Mat2 dginv = step.jacobian.inverse();
    auto box = [](const TangentVector& c) { return std::max(std::abs(c.a), std::abs(c.b)); };
    double fu = std::numeric_limits<double>::infinity(), fs = fu;
    for (int i = 0; i < n_dirs; ++i) {
        const double t = sample_t(i, n_dirs);
        const TangentVector vu{1.0, cx.kappa.kappa_u * t};
        fu = std::min(fu, box(cgx.frame.to_frame(step.jacobian * cx.frame.from_frame(vu.a, vu.b))) / box(vu));
        const TangentVector vs{cgx.kappa.kappa_s * t, 1.0};
        fs = std::min(fs, box(cx.frame.to_frame(dginv * cgx.frame.from_frame(vs.a, vs.b))) / box(vs));
    }
    GrowthCheck out;
    out.factor_u = fu;
    out.factor_s = fs;
    out.margin_u = fu - std::sqrt(cx.frame.m_u);
    out.margin_s = fs - std::sqrt(cgx.frame.m_s_inv);
    out.pass = fu > 1.0 && fs > 1.0 && out.margin_u >= 0.0 && out.margin_s >= 0.0;
    return out;
}

namespace {

// Nested images D g^k (C_{x_k}) of f's cones; returns the limit line at x.
template <class StepFn>
TangentVector nested_cone_limit(const SystemSpec& g, const ConeFamily& cones, const Point& x, int n_iters,
                                bool unstable, StepFn&& step, Mat2& first_jacobian) {
    Mat2 M = Mat2::identity();
    Point y = x;
    for (int k = 1; k <= n_iters; ++k) {
        const MapStep s = step(y);
        if (k == 1) first_jacobian = s.jacobian;
        y = s.image;
        check_in_domain(g, y);
        M = renormalized(M * s.jacobian.inverse());
        const ConeFamily::At c = cones.at(y);
        const double kappa = unstable ? c.kappa.kappa_u : c.kappa.kappa_s;
        const TangentVector axis = unstable ? c.frame.e_u : c.frame.e_s;
        const TangentVector side = unstable ? c.frame.e_s : c.frame.e_u;
        const TangentVector r1 = (M * (axis + kappa * side)).normalized();
        const TangentVector r2 = (M * (axis - kappa * side)).normalized();
        if (std::abs(r1.cross(r2)) < kSplittingTol) return (M * axis).normalized();
    }
    fail(ErrorCode::NoConvergence, "nested cones at " + to_string(x));
}

}  // namespace

Splitting perturbed_splitting(const SystemSpec& g, const ConeFamily& cones, const Point& x, int n_iters) {
    boundary_dist(x, g.domain());
    Mat2 dginv, dg;
    const TangentVector eu = nested_cone_limit(g, cones, x, n_iters, true,
                                               [&](const Point& y) { return g.backward_step(y); }, dginv);
    const TangentVector es = nested_cone_limit(g, cones, x, n_iters, false,
                                               [&](const Point& y) { return g.forward_step(y); }, dg);
    const CatEigen& ce = cat_eigen();
    Splitting out;
    out.e_u = orient(eu, ce.e_u);
    out.e_s = orient(es, ce.e_s);
    if (out.frame_det() < kMinFrameDet) fail(ErrorCode::DegenerateFrame, "perturbed frame at " + to_string(x));
    out.m_u = (dg * out.e_u).norm();
    out.n_s = (dg * out.e_s).norm();
    out.m_s_inv = (dginv * out.e_s).norm();
    out.n_u_inv = (dginv * out.e_u).norm();
    return out;
}

}  // namespace pwh
