#include "pwh/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "pwh/errors.hpp"

namespace pwh {

LocalMapData::LocalMapData(SystemSpec sys, ScaleParams scales, Point x, Point y, Splitting frame_x,
                           Splitting frame_y)
    : sys_(std::move(sys)), scales_(scales), x_(x), y_(y), frame_x_(frame_x), frame_y_(frame_y) {
    const MapStep step = sys_.forward_step(x_);
    df_x_ = step.jacobian;
    gap = torus_dist(step.image, y_);
    const TangentVector cu = frame_y_.to_frame(df_x_ * frame_x_.e_u);
    const TangentVector cs = frame_y_.to_frame(df_x_ * frame_x_.e_s);
    d_uu = cu.a;
    d_su = cu.b;
    d_us = cs.a;
    d_ss = cs.b;
    offset = frame_y_.to_frame(log_map(y_, step.image));
    eps_eps = eps_eps_at(scales_, sys_, x_);
    q_x = q_at(scales_, sys_, x_);
    q_y = q_at(scales_, sys_, y_);
}

TangentVector LocalMapData::apply(const TangentVector& c) const {
    const Point z = exp_map(x_, frame_x_.from_frame(c.a, c.b));
    return frame_y_.to_frame(log_map(y_, sys_.forward(z)));
}

TangentVector LocalMapData::apply_inverse(const TangentVector& c) const {
    const Point z = exp_map(y_, frame_y_.from_frame(c.a, c.b));
    return frame_x_.to_frame(log_map(x_, sys_.backward(z)));
}

TangentVector LocalMapData::remainder(const TangentVector& c) const { return apply(c) - blocks() * c; }

Mat2 LocalMapData::remainder_derivative(const TangentVector& c) const {
    const Point z = exp_map(x_, frame_x_.from_frame(c.a, c.b));
    const Mat2 diff = sys_.jacobian(z) - df_x_;
    const Mat2 px = frame_x_.basis();
    return frame_y_.basis().inverse() * diff * px;
}

LocalMapData local_map_with_frames(const SystemSpec& sys, const ScaleParams& scales, const Point& x,
                                   const Point& y, const Splitting& frame_x, const Splitting& frame_y) {
    return LocalMapData(sys, scales, x, y, frame_x, frame_y);
}

LocalMapData local_map(const SystemSpec& sys, const ScaleParams& scales, const Point& x, const Point& y,
                       int n_iters) {
    const double du = delta_u_fn(scales, sys, x, n_iters);
    const double gap = torus_dist(sys.forward(x), y);
    if (!(gap < du)) {
        fail(ErrorCode::TargetTooFar, "d(f(x), y) = " + std::to_string(gap) + " >= delta_u = " + std::to_string(du));
    }
    return LocalMapData(sys, scales, x, y, compute_splitting(sys, x, n_iters), compute_splitting(sys, y, n_iters));
}

double BlockReport::worst_slack() const {
    return std::min({slack_us, slack_su, slack_uu, slack_ss, slack_lipschitz, slack_holder});
}

BlockReport block_estimates(const LocalMapData& lm, int samples) {
    BlockReport r;
    r.budget = lm.eps_eps;
    r.slack_us = r.budget - std::abs(lm.d_us);
    r.slack_su = r.budget - std::abs(lm.d_su);
    r.slack_uu = r.budget - std::abs(std::abs(lm.d_uu) - lm.frame_x().m_u);
    r.slack_ss = r.budget - std::abs(std::abs(lm.d_ss) - lm.frame_x().n_s);

    std::vector<TangentVector> pts;
    std::vector<Mat2> dphi;
    const double q = lm.q_x;
    for (int i = 0; i < samples; ++i) {
        for (int j = 0; j < samples; ++j) {
            const double a = samples > 1 ? -q + 2.0 * q * i / (samples - 1) : 0.0;
            const double b = samples > 1 ? -q + 2.0 * q * j / (samples - 1) : 0.0;
            pts.push_back({a, b});
            dphi.push_back(lm.remainder_derivative({a, b}));
        }
    }
    const double hexp = 0.5 * lm.scales().delta;
    // Pair distances on the grid depend only on the index offsets.
    const std::size_t ns = static_cast<std::size_t>(samples);
    std::vector<double> inv_pow(ns * ns, 0.0);
    for (std::size_t di = 0; di < ns; ++di) {
        for (std::size_t dj = 0; dj < ns; ++dj) {
            if (di + dj == 0) continue;
            const TangentVector off = pts[di * ns + dj] - pts[0];
            inv_pow[di * ns + dj] = 1.0 / std::pow(off.norm(), hexp);
        }
    }
    const bool constant = std::all_of(dphi.begin(), dphi.end(), [&](const Mat2& m) { return (m - dphi[0]).max_abs_entry() == 0.0; });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        r.lipschitz = std::max(r.lipschitz, dphi[i].op_norm());
        if (constant) continue;
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const Mat2 diff = dphi[i] - dphi[j];
            if (diff.max_abs_entry() == 0.0) continue;
            const std::size_t di = i / ns > j / ns ? i / ns - j / ns : j / ns - i / ns;
            const std::size_t dj = i % ns > j % ns ? i % ns - j % ns : j % ns - i % ns;
            r.holder = std::max(r.holder, diff.op_norm() * inv_pow[di * ns + dj]);
        }
    }
    r.slack_lipschitz = r.budget - r.lipschitz;
    r.slack_holder = r.budget - r.holder;
    r.pass = r.worst_slack() >= 0.0;
    return r;
}

std::vector<double> finite_difference(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    std::vector<double> d(n, 0.0);
    if (n < 5) {
        for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i]) / h;
        if (n >= 2) d[n - 1] = d[n - 2];
        return d;
    }
    const double s = 1.0 / (12.0 * h);
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) * s;
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) * s;
    for (std::size_t i = 2; i + 2 < n; ++i) d[i] = (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]) * s;
    d[n - 2] = (3 * f[n - 1] + 10 * f[n - 2] - 18 * f[n - 3] + 6 * f[n - 4] - f[n - 5]) * s;
    d[n - 1] = (25 * f[n - 1] - 48 * f[n - 2] + 36 * f[n - 3] - 16 * f[n - 4] + 3 * f[n - 5]) * s;
    return d;
}

AdmissibleManifold AdmissibleManifold::from_values(const Point& base, ManifoldKind kind, double radius,
                                                   const Splitting& frame, std::vector<double> phi) {
    AdmissibleManifold w;
    w.base = base;
    w.kind = kind;
    w.radius = radius;
    w.frame = frame;
    w.phi = std::move(phi);
    const int n = w.size();
    std::vector<double> knots(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) knots[static_cast<std::size_t>(i)] = w.node(i);
    w.dphi = finite_difference(w.phi, w.spacing());
    w.interp_ = Pchip(std::move(knots), w.phi);
    return w;
}

AdmissibleManifold AdmissibleManifold::zero(const Point& base, ManifoldKind kind, double radius,
                                            const Splitting& frame, int n_grid) {
    return from_values(base, kind, radius, frame, std::vector<double>(static_cast<std::size_t>(n_grid), 0.0));
}

double AdmissibleManifold::evaluate(double v) const {
    const int n = size();
    const double h = spacing();
    std::size_t k = static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor((v + radius) / h)), 0, n - 2));
    return interp_.eval_segment(k, v);
}

TangentVector AdmissibleManifold::frame_point(double v) const {
    const double p = evaluate(v);
    return kind == ManifoldKind::unstable ? TangentVector{v, p} : TangentVector{p, v};
}

Point AdmissibleManifold::point_at(double v) const {
    const TangentVector c = frame_point(v);
    return exp_map(base, frame.from_frame(c.a, c.b));
}

AdmissibilityReport admissibility_check(const AdmissibleManifold& w, const ScaleParams& scales) {
    AdmissibilityReport r;
    const int n = w.size();
    r.phi0 = (n % 2 == 1) ? std::abs(w.phi[static_cast<std::size_t>(n / 2)]) : std::abs(w.evaluate(0.0));
    for (double d : w.dphi) r.max_dphi = std::max(r.max_dphi, std::abs(d));

    // Holder quotient over node pairs at least 4 spacings apart, one separation at a time.
    const double h = w.spacing();
    const double e = 0.5 * scales.delta;
    double holder = 0.0;
    const double* d = w.dphi.data();
    for (int k = 4; k < n; ++k) {
        double m = 0.0;
        for (int i = 0; i + k < n; ++i) {
            const double a = std::abs(d[i] - d[i + k]);
            m = a > m ? a : m;
        }
        holder = std::max(holder, m / std::pow(k * h, e));
    }
    r.holder = holder;

    const double lim_value = 1e-3 * w.radius;
    const double lim_slope = std::sqrt(scales.eps);
    r.slack_value = lim_value > 0.0 ? 1.0 - r.phi0 / lim_value : -1.0;
    r.slack_slope = 1.0 - r.max_dphi / lim_slope;
    r.slack_holder = 1.0 - (r.max_dphi + r.holder) / 0.5;
    const double slacks[3] = {r.slack_value, r.slack_slope, r.slack_holder};
    r.tightest = static_cast<int>(std::min_element(slacks, slacks + 3) - slacks);
    r.pass = r.slack_value >= 0.0 && r.slack_slope >= 0.0 && r.slack_holder >= 0.0;
    return r;
}

namespace {

const char* bound_name(int which) {
    switch (which) {
    case 0: return "|phi(0)| <= 1e-3 Q";
    case 1: return "|D phi| <= sqrt(eps)";
    default: return "Holder norm <= 1/2";
    }
}

// Sufficient condition for admissibility in O(n): the Holder quotient at separation >= 4
// spacings is at most (max dphi - min dphi) / (4h)^(delta/2).
bool clearly_admissible(const AdmissibleManifold& w, const ScaleParams& scales) {
    const auto [lo, hi] = std::minmax_element(w.dphi.begin(), w.dphi.end());
    const double max_dphi = std::max(std::abs(*lo), std::abs(*hi));
    const double holder_bound = (*hi - *lo) / std::pow(4.0 * w.spacing(), 0.5 * scales.delta);
    const int n = w.size();
    const double phi0 = (n % 2 == 1) ? std::abs(w.phi[static_cast<std::size_t>(n / 2)]) : std::abs(w.evaluate(0.0));
    return phi0 <= 1e-3 * w.radius && max_dphi <= std::sqrt(scales.eps) && max_dphi + holder_bound <= 0.5;
}

// Solve interp(t) = target on segment k, where the interpolant is increasing there.
double invert_on_segment(const Pchip& p, std::size_t k, double target) {
    const auto& t = p.knots();
    const auto& y = p.values();
    double lo = t[k], hi = t[k + 1];
    const double ylo = y[k], yhi = y[k + 1];
    if (target <= ylo) return lo;
    if (target >= yhi) return hi;
    double s = lo + (target - ylo) / (yhi - ylo) * (hi - lo);
    for (int it = 0; it < 60; ++it) {
        const double g = p.eval_segment(k, s) - target;
        if (g == 0.0) return s;
        if (g < 0.0) lo = s; else hi = s;
        const double dg = p.derivative_segment(k, s);
        double next = dg > 0.0 ? s - g / dg : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - s) <= 1e-15 * (std::abs(lo) + std::abs(hi))) return next;
        s = next;
    }
    return s;
}

// Shared core of both transforms. G, L are the along-axis and off-axis components of the
// image of the graph nodes; the output graph is L o G^{-1} sampled on [-radius, radius].
AdmissibleManifold reparametrize(const std::vector<double>& nodes, std::vector<double> G, std::vector<double> L,
                                 const Point& base, ManifoldKind kind, double radius, const Splitting& frame,
                                 const ScaleParams& scales) {
    const std::size_t n = nodes.size();
    bool inc = true, dec = true;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        inc &= G[i + 1] > G[i];
        dec &= G[i + 1] < G[i];
    }
    if (!inc && !dec) fail(ErrorCode::GraphFoldover, "image of the graph is not monotone over the axis");
    std::vector<double> knots(n);
    if (dec) {
        // Reparametrize by -v so that G increases.
        std::reverse(G.begin(), G.end());
        std::reverse(L.begin(), L.end());
        for (std::size_t i = 0; i < n; ++i) knots[i] = -nodes[n - 1 - i];
    } else {
        knots = nodes;
    }
    if (G.front() > -radius || G.back() < radius) {
        fail(ErrorCode::OutputNotAdmissible, "image covers [" + std::to_string(G.front()) + ", " +
                                                 std::to_string(G.back()) + "], need radius " + std::to_string(radius));
    }
    const Pchip pg(knots, G);
    const Pchip pl(knots, L);
    std::vector<double> out(n);
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const double target = -radius + 2.0 * radius * static_cast<double>(j) / static_cast<double>(n - 1);
        while (k + 2 < n && G[k + 1] < target) ++k;
        const double t = invert_on_segment(pg, k, target);
        out[j] = pl.eval_segment(k, t);
    }
    AdmissibleManifold w = AdmissibleManifold::from_values(base, kind, radius, frame, std::move(out));
    if (!clearly_admissible(w, scales)) {
        const AdmissibilityReport rep = admissibility_check(w, scales);
        if (!rep.pass) fail(ErrorCode::OutputNotAdmissible, std::string("violates ") + bound_name(rep.tightest));
    }
    return w;
}

std::vector<double> nodes_of(const AdmissibleManifold& w) {
    std::vector<double> v(static_cast<std::size_t>(w.size()));
    for (int i = 0; i < w.size(); ++i) v[static_cast<std::size_t>(i)] = w.node(i);
    return v;
}

}  // namespace

AdmissibleManifold graph_transform_u(const LocalMapData& lm, const AdmissibleManifold& w) {
    if (w.kind != ManifoldKind::unstable) fail(ErrorCode::InvariantViolation, "graph_transform_u needs a u-manifold");
    if (torus_dist(w.base, lm.x()) > 1e-14) fail(ErrorCode::InvariantViolation, "manifold not based at x");
    const std::vector<double> nodes = nodes_of(w);
    std::vector<double> G(nodes.size()), L(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const TangentVector img = lm.apply({nodes[i], w.phi[i]});
        G[i] = img.a;
        L[i] = img.b;
    }
    return reparametrize(nodes, std::move(G), std::move(L), lm.y(), ManifoldKind::unstable, lm.q_y, lm.frame_y(),
                         lm.scales());
}

AdmissibleManifold graph_transform_s(const LocalMapData& lm, const AdmissibleManifold& w) {
    if (w.kind != ManifoldKind::stable) fail(ErrorCode::InvariantViolation, "graph_transform_s needs an s-manifold");
    if (torus_dist(w.base, lm.y()) > 1e-14) fail(ErrorCode::InvariantViolation, "manifold not based at y");
    const std::vector<double> nodes = nodes_of(w);
    std::vector<double> G(nodes.size()), L(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const TangentVector img = lm.apply_inverse({w.phi[i], nodes[i]});
        G[i] = img.b;
        L[i] = img.a;
    }
    return reparametrize(nodes, std::move(G), std::move(L), lm.x(), ManifoldKind::stable, lm.q_x, lm.frame_x(),
                         lm.scales());
}

ContractionReport contraction_factor(const LocalMapData& lm, const AdmissibleManifold& w1,
                                     const AdmissibleManifold& w2) {
    if (w1.kind != w2.kind || w1.size() != w2.size()) {
        fail(ErrorCode::InvariantViolation, "contraction_factor needs manifolds of the same kind and grid");
    }
    double din = 0.0;
    for (int i = 0; i < w1.size(); ++i) {
        din = std::max(din, std::abs(w1.phi[static_cast<std::size_t>(i)] - w2.phi[static_cast<std::size_t>(i)]));
    }
    if (din < 1e-15) fail(ErrorCode::IdenticalInputs, "sup|phi1 - phi2| = " + std::to_string(din));
    const bool u = w1.kind == ManifoldKind::unstable;
    const AdmissibleManifold t1 = u ? graph_transform_u(lm, w1) : graph_transform_s(lm, w1);
    const AdmissibleManifold t2 = u ? graph_transform_u(lm, w2) : graph_transform_s(lm, w2);
    double dout = 0.0;
    for (int i = 0; i < t1.size(); ++i) {
        dout = std::max(dout, std::abs(t1.phi[static_cast<std::size_t>(i)] - t2.phi[static_cast<std::size_t>(i)]));
    }
    ContractionReport r;
    r.factor = dout / din;
    r.bound = u ? std::sqrt(lm.frame_x().n_s) : std::sqrt(lm.frame_y().n_u_inv);
    r.tolerance = 2.0 * t1.spacing();
    r.pass = r.factor <= r.bound + r.tolerance;
    return r;
}

void write_manifold_csv(const AdmissibleManifold& w, std::ostream& out) {
    out << "v,phi,dphi\n";
    char buf[96];
    for (int i = 0; i < w.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", w.node(i), w.phi[static_cast<std::size_t>(i)],
                      w.dphi[static_cast<std::size_t>(i)]);
        out << buf;
    }
}

}  // namespace pwh
