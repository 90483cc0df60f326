#include "pwh/shadowing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pwh/errors.hpp"

namespace pwh {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBoxSlack = 1e-12;

struct PointData {
    Point x, fx, bx;
    Splitting split;
    double q = 0.0, q_fx = 0.0, q_bx = 0.0, du = 0.0, ds = 0.0;
};

double delta_u(const SystemSpec& sys, const ScaleParams& s, const Point& x, const OrbitOptions& opts) {
    return opts.refine_delta ? delta_u_fn(s, sys, x, opts.n_iters) : delta_u_base(s, sys, x);
}

PointData analyze(const SystemSpec& sys, const ScaleParams& s, const Point& x, const OrbitOptions& opts) {
    const double d = boundary_dist_or_zero(x, sys.domain());
    if (d < opts.d_min) {
        fail(ErrorCode::OrbitLeavesDomain, to_string(x) + " is within d_min of the boundary");
    }
    PointData p;
    p.x = x;
    p.fx = sys.forward(x);
    p.bx = sys.backward(x);
    p.split = compute_splitting(sys, x, opts.n_iters);
    p.q = q_at(s, sys, x);
    p.q_fx = q_at(s, sys, p.fx);
    p.q_bx = q_at(s, sys, p.bx);
    p.du = delta_u(sys, s, x, opts);
    p.ds = delta_u(sys.inverse(), s, x, opts);
    return p;
}

double forward_bound(const PointData& a, GapMode mode) {
    return mode == GapMode::strict ? a.du * a.q * a.q * a.q_fx : a.du;
}

double backward_bound(const PointData& b, GapMode mode) {
    return mode == GapMode::strict ? b.ds * b.q * b.q * b.q_bx : b.ds;
}

StepCheck check_step(const PointData& a, const PointData& b, GapMode mode) {
    StepCheck c;
    c.forward_gap = torus_dist(a.fx, b.x);
    c.forward_bound = forward_bound(a, mode);
    c.backward_gap = torus_dist(b.bx, a.x);
    c.backward_bound = backward_bound(b, mode);
    return c;
}

void fill_from_data(PseudoOrbit& po, const std::vector<PointData>& data, const OrbitOptions& opts) {
    const std::size_t n = data.size();
    po.points.resize(n);
    po.frames.resize(n);
    po.q.resize(n);
    po.steps.resize(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        po.points[i] = data[i].x;
        po.frames[i] = data[i].split;
        po.q[i] = data[i].q;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) po.steps[i] = check_step(data[i], data[i + 1], opts.mode);
    const std::size_t k = static_cast<std::size_t>(po.K);
    po.stable_product = 1.0;
    po.unstable_inv_product = 1.0;
    for (std::size_t i = 0; i <= k; ++i) {
        po.stable_product *= po.frames[k - i].n_s;
        po.unstable_inv_product *= po.frames[k + i].n_u_inv;
    }
    po.products_ok = po.stable_product < opts.product_threshold && po.unstable_inv_product < opts.product_threshold;
}

TangentVector draw_kick(std::mt19937_64& rng, double fraction, double bound) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double a = unif(rng);
    const double th = 2.0 * kPi * unif(rng);
    double r;
    if (fraction >= 1.0) {
        // Area-uniform on the annulus [bound, fraction * bound].
        r = bound * std::sqrt(1.0 + a * (fraction * fraction - 1.0));
    } else {
        r = fraction * bound * std::sqrt(a);
    }
    return {r * std::cos(th), r * std::sin(th)};
}

}  // namespace

bool PseudoOrbit::steps_ok() const {
    return std::all_of(steps.begin(), steps.end(), [](const StepCheck& c) { return c.ok(); });
}

PseudoOrbit make_noisy_orbit(const SystemSpec& sys, const ScaleParams& scales, const Point& x0, int K,
                             double kick_fraction, std::uint64_t seed, const OrbitOptions& opts) {
    if (K < 1) fail(ErrorCode::ConfigError, "window K must be positive");
    if (!(kick_fraction >= 0.0)) fail(ErrorCode::ConfigError, "kick_fraction must be nonnegative");
    std::mt19937_64 rng(seed);
    const std::size_t k = static_cast<std::size_t>(K);
    std::vector<PointData> data(2 * k + 1);
    data[k] = analyze(sys, scales, x0, opts);
    const bool exact = kick_fraction == 0.0;
    const bool reject = kick_fraction < 1.0;

    for (std::size_t i = k; i < 2 * k; ++i) {
        const PointData& a = data[i];
        const double bound = forward_bound(a, opts.mode);
        bool accepted = false;
        for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
            const Point cand = exact ? a.fx : exp_map(a.fx, draw_kick(rng, kick_fraction, bound));
            PointData b = analyze(sys, scales, cand, opts);
            if (!reject || torus_dist(b.bx, a.x) < backward_bound(b, opts.mode)) {
                data[i + 1] = std::move(b);
                accepted = true;
            }
        }
        if (!accepted) fail(ErrorCode::CannotSatisfyBothConditions, "forward step " + std::to_string(i - k));
    }
    for (std::size_t i = k; i > 0; --i) {
        const PointData& b = data[i];
        // The kick bound belongs to x_{n-1}; estimate it at f^{-1}(x_n), which is within |kick| of it.
        double bound = 0.0;
        if (!exact) {
            const Point e = b.bx;
            const double du = delta_u(sys, scales, e, opts);
            bound = opts.mode == GapMode::strict ? du * std::pow(q_at(scales, sys, e), 2) * q_at(scales, sys, b.x) : du;
        }
        bool accepted = false;
        for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
            const Point cand = exact ? b.bx : sys.backward(exp_map(b.x, -draw_kick(rng, kick_fraction, bound)));
            PointData a = analyze(sys, scales, cand, opts);
            const StepCheck c = check_step(a, b, opts.mode);
            if (!reject || c.ok()) {
                data[i - 1] = std::move(a);
                accepted = true;
            }
        }
        if (!accepted) fail(ErrorCode::CannotSatisfyBothConditions, "backward step " + std::to_string(i) + " - K");
    }
    PseudoOrbit po;
    po.K = K;
    fill_from_data(po, data, opts);
    return po;
}

PseudoOrbit pseudo_orbit_from_points(const SystemSpec& sys, const ScaleParams& scales, std::vector<Point> points,
                                     const OrbitOptions& opts) {
    if (points.size() < 3 || points.size() % 2 == 0) {
        fail(ErrorCode::ConfigError, "a window needs 2K+1 points");
    }
    std::vector<PointData> data(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) data[i] = analyze(sys, scales, points[i], opts);
    PseudoOrbit po;
    po.K = static_cast<int>(points.size() / 2);
    fill_from_data(po, data, opts);
    return po;
}

PseudoOrbit sub_window(const PseudoOrbit& po, int n, int K, const OrbitOptions& opts) {
    if (K < 1 || n - K < -po.K || n + K > po.K) fail(ErrorCode::ConfigError, "sub-window outside the orbit");
    const auto first = static_cast<std::ptrdiff_t>(n - K + po.K);
    const auto len = static_cast<std::ptrdiff_t>(2 * K + 1);
    PseudoOrbit out;
    out.K = K;
    out.points.assign(po.points.begin() + first, po.points.begin() + first + len);
    out.frames.assign(po.frames.begin() + first, po.frames.begin() + first + len);
    out.q.assign(po.q.begin() + first, po.q.begin() + first + len);
    out.steps.assign(po.steps.begin() + first, po.steps.begin() + first + len - 1);
    const std::size_t k = static_cast<std::size_t>(K);
    out.stable_product = 1.0;
    out.unstable_inv_product = 1.0;
    for (std::size_t i = 0; i <= k; ++i) {
        out.stable_product *= out.frames[k - i].n_s;
        out.unstable_inv_product *= out.frames[k + i].n_u_inv;
    }
    out.products_ok =
        out.stable_product < opts.product_threshold && out.unstable_inv_product < opts.product_threshold;
    return out;
}

ValidationReport validate_pseudo_orbit(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                                       const OrbitOptions& opts) {
    std::vector<PointData> data(po.points.size());
    for (std::size_t i = 0; i < po.points.size(); ++i) data[i] = analyze(sys, scales, po.points[i], opts);
    PseudoOrbit fresh;
    fresh.K = po.K;
    fill_from_data(fresh, data, opts);
    ValidationReport rep;
    rep.steps = fresh.steps;
    for (std::size_t i = 0; i < rep.steps.size(); ++i) {
        if (!rep.steps[i].ok()) {
            rep.first_failing_step = static_cast<int>(i) - po.K;
            break;
        }
    }
    rep.stable_product = fresh.stable_product;
    rep.unstable_inv_product = fresh.unstable_inv_product;
    rep.products_ok = fresh.products_ok;
    rep.pass = !rep.first_failing_step && rep.products_ok;
    return rep;
}

namespace {

LocalMapData step_map(const SystemSpec& sys, const ScaleParams& s, const PseudoOrbit& po, std::size_t i) {
    return LocalMapData(sys, s, po.points[i], po.points[i + 1], po.frames[i], po.frames[i + 1]);
}

AdmissibleManifold seed_at(const ManifoldSeed& seed, const PseudoOrbit& po, std::size_t i, ManifoldKind kind) {
    if (seed) return seed(po.points[i], kind, po.q[i], po.frames[i]);
    return AdmissibleManifold::zero(po.points[i], kind, po.q[i], po.frames[i]);
}

double sup_diff(const AdmissibleManifold& a, const AdmissibleManifold& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.phi.size(); ++i) m = std::max(m, std::abs(a.phi[i] - b.phi[i]));
    return m;
}

ManifoldLimit limit_impl(const SystemSpec& sys, const ScaleParams& s, const PseudoOrbit& po, ManifoldKind kind,
                         const ManifoldOptions& opts) {
    const std::size_t k = static_cast<std::size_t>(po.K);
    const bool u = kind == ManifoldKind::unstable;
    std::vector<LocalMapData> maps;
    maps.reserve(k);
    // maps[j] is the step adjacent to x_0 at distance j: (x_{-j-1}, x_{-j}) or (x_j, x_{j+1}).
    for (std::size_t j = 0; j < k; ++j) maps.push_back(step_map(sys, s, po, u ? k - j - 1 : k + j));
    std::optional<AdmissibleManifold> prev;
    double bound = 1.0;
    for (std::size_t depth = 1; depth <= k; ++depth) {
        const std::size_t i0 = u ? k - depth : k + depth;
        bound *= std::sqrt(u ? po.frames[i0].n_s : po.frames[i0].n_u_inv);
        AdmissibleManifold w = seed_at(opts.seed, po, i0, kind);
        for (std::size_t j = depth; j-- > 0;) w = u ? graph_transform_u(maps[j], w) : graph_transform_s(maps[j], w);
        if (prev && static_cast<int>(depth) >= opts.min_depth) {
            const double inc = sup_diff(w, *prev);
            if (inc < opts.tol) return {std::move(w), static_cast<int>(depth), inc, bound};
        }
        prev = std::move(w);
    }
    fail(ErrorCode::NotCauchyWithinWindow, "manifold increments stay above " + std::to_string(opts.tol) +
                                               " within K = " + std::to_string(po.K));
}

}  // namespace

ManifoldLimit local_unstable_manifold(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                                      const ManifoldOptions& opts) {
    return limit_impl(sys, scales, po, ManifoldKind::unstable, opts);
}

ManifoldLimit local_stable_manifold(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                                    const ManifoldOptions& opts) {
    return limit_impl(sys, scales, po, ManifoldKind::stable, opts);
}

ManifoldLimit manifold_at_depth(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                                ManifoldKind kind, int depth, const ManifoldSeed& seed) {
    if (depth < 1 || depth > po.K) fail(ErrorCode::ConfigError, "depth outside the window");
    const std::size_t k = static_cast<std::size_t>(po.K);
    const std::size_t d = static_cast<std::size_t>(depth);
    const bool u = kind == ManifoldKind::unstable;
    double bound = 1.0;
    const std::size_t i0 = u ? k - d : k + d;
    AdmissibleManifold w = seed_at(seed, po, i0, kind);
    for (std::size_t j = d; j-- > 0;) {
        const std::size_t i = u ? k - j - 1 : k + j;
        const LocalMapData lm = step_map(sys, scales, po, i);
        w = u ? graph_transform_u(lm, w) : graph_transform_s(lm, w);
    }
    for (std::size_t j = 1; j <= d; ++j) bound *= std::sqrt(u ? po.frames[k - j].n_s : po.frames[k + j].n_u_inv);
    return {std::move(w), depth, 0.0, bound};
}

ShadowCertificate shadow_point(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                               const ShadowOptions& opts) {
    const std::size_t n = po.points.size();
    const std::size_t k = static_cast<std::size_t>(po.K);
    std::vector<LocalMapData> maps;
    maps.reserve(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) maps.push_back(step_map(sys, scales, po, i));

    std::vector<AdmissibleManifold> wu;
    wu.reserve(n);
    wu.push_back(AdmissibleManifold::zero(po.points[0], ManifoldKind::unstable, po.q[0], po.frames[0]));
    for (std::size_t i = 0; i + 1 < n; ++i) wu.push_back(graph_transform_u(maps[i], wu[i]));
    std::vector<AdmissibleManifold> ws(n);
    ws[n - 1] = AdmissibleManifold::zero(po.points[n - 1], ManifoldKind::stable, po.q[n - 1], po.frames[n - 1]);
    for (std::size_t i = n - 1; i-- > 0;) ws[i] = graph_transform_s(maps[i], ws[i + 1]);

    ShadowCertificate cert;
    cert.orbit.resize(n);
    std::vector<double> box(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = po.q[i];
        double v = opts.initial_fraction * r;
        double inc = std::numeric_limits<double>::infinity();
        int it = 0;
        for (; it < opts.max_iter; ++it) {
            const double a = wu[i].evaluate(std::clamp(v, -r, r));
            if (std::abs(a) > r || std::abs(v) > r) {
                fail(ErrorCode::ContractionStalled, "iterate left the box at n = " + std::to_string(i) + " - K");
            }
            const double next = ws[i].evaluate(a);
            inc = std::abs(next - v);
            v = next;
            if (inc < opts.tol) break;
        }
        if (!(inc < opts.tol)) {
            fail(ErrorCode::ContractionStalled, "increment " + std::to_string(inc) + " at n = " + std::to_string(i) + " - K");
        }
        const double s = wu[i].evaluate(v);
        cert.orbit[i] = exp_map(po.points[i], po.frames[i].from_frame(v, s));
        box[i] = std::max(std::abs(v), std::abs(s)) / r;
        if (i == k) {
            cert.shadow = cert.orbit[i];
            cert.distance_to_x0 = po.frames[i].from_frame(v, s).norm();
            cert.fixed_point_residual = inc;
        }
    }
    cert.q_x0 = po.q[k];

    // Horizon: the largest h with box containment for |n| <= h and orbit consistency in between.
    auto box_ok = [&](std::size_t i) { return box[i] * po.q[i] <= po.q[i] + kBoxSlack; };
    std::vector<double> resid(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        resid[i] = torus_dist(sys.forward(cert.orbit[i]), cert.orbit[i + 1]);
        cert.orbit_residual = std::max(cert.orbit_residual, resid[i]);
    }
    for (std::size_t i = 0; i < n; ++i) cert.max_box_ratio = std::max(cert.max_box_ratio, box[i]);
    int h = -1;
    for (std::size_t j = 0; j <= k; ++j) {
        const bool ok = box_ok(k + j) && box_ok(k - j) &&
                        (j == 0 || (resid[k + j - 1] <= opts.orbit_tol && resid[k - j] <= opts.orbit_tol));
        if (!ok) break;
        h = static_cast<int>(j);
    }
    cert.containment_horizon = std::max(h, 0);
    if (h < po.K) {
        fail(ErrorCode::ContainmentFailure, "first violation at |n| = " + std::to_string(h + 1));
    }

    // Direct iteration of f from the shadow, for as long as round-off growth allows.
    auto direct = [&](bool fwd) {
        Point p = cert.shadow;
        int reached = 0;
        for (std::size_t j = 1; j <= k; ++j) {
            p = fwd ? sys.forward(p) : sys.backward(p);
            const std::size_t i = fwd ? k + j : k - j;
            const TangentVector w = displacement(po.points[i], p);
            if (w.norm() >= kRho) break;
            const TangentVector c = po.frames[i].to_frame(w);
            if (std::max(std::abs(c.a), std::abs(c.b)) > po.q[i] + kBoxSlack) break;
            reached = static_cast<int>(j);
        }
        return reached;
    };
    cert.direct_horizon = std::min(direct(true), direct(false));
    cert.pass = cert.distance_to_x0 <= cert.q_x0 / 50.0 && cert.containment_horizon == po.K;
    return cert;
}

LinearShadow linearized_shadow(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                               int max_sweeps) {
    const std::size_t n = po.points.size();
    std::vector<LocalMapData> maps;
    maps.reserve(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) maps.push_back(step_map(sys, scales, po, i));
    LinearShadow out;
    std::vector<TangentVector> c(n);
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        const std::vector<TangentVector> prev = c;
        c[0].b = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const LocalMapData& m = maps[i];
            c[i + 1].b = m.d_su * c[i].a + m.d_ss * c[i].b + m.offset.b;
        }
        c[n - 1].a = 0.0;
        for (std::size_t i = n - 1; i-- > 0;) {
            const LocalMapData& m = maps[i];
            c[i].a = (c[i + 1].a - m.d_us * c[i].b - m.offset.a) / m.d_uu;
        }
        out.sweeps = sweep;
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, (c[i] - prev[i]).norm());
        if (change == 0.0) break;
    }
    const std::size_t k = static_cast<std::size_t>(po.K);
    out.shadow = exp_map(po.points[k], po.frames[k].from_frame(c[k].a, c[k].b));
    out.offsets = std::move(c);
    return out;
}

ExpansivityVerdict expansivity_test(const SystemSpec& sys, const ScaleParams& scales, const Point& x, const Point& y,
                                    int K) {
    auto radius = [&](const Point& p) {
        if (boundary_dist_or_zero(p, sys.domain()) <= 0.0) {
            fail(ErrorCode::OrbitLeavesDomain, to_string(p));
        }
        return q_at(scales, sys, p);
    };
    auto check = [&](const Point& a, const Point& b, int n) -> std::optional<ExpansivityVerdict> {
        const double r = radius(a);
        radius(b);
        const double d = torus_dist(a, b);
        if (d > r) return ExpansivityVerdict{true, n, d, r};
        return std::nullopt;
    };
    if (auto v = check(x, y, 0)) return *v;
    Point fx = x, fy = y, bx = x, by = y;
    for (int n = 1; n <= K; ++n) {
        fx = sys.forward(fx);
        fy = sys.forward(fy);
        if (auto v = check(fx, fy, n)) return *v;
        bx = sys.backward(bx);
        by = sys.backward(by);
        if (auto v = check(bx, by, -n)) return *v;
    }
    return ExpansivityVerdict{false, K, torus_dist(x, y), radius(x)};
}

std::vector<ShadowJobResult> certify_batch(const SystemSpec& sys, const ScaleParams& scales,
                                           const std::vector<ShadowJob>& jobs, const OrbitOptions& orbit_opts,
                                           const ShadowOptions& shadow_opts, Execution exec) {
    std::vector<ShadowJobResult> out(jobs.size());
    for_each_index(jobs.size(), exec, [&](std::size_t i) {
        ShadowJobResult& r = out[i];
        r.job = jobs[i];
        try {
            const PseudoOrbit po =
                make_noisy_orbit(sys, scales, jobs[i].x0, jobs[i].K, jobs[i].kick_fraction, jobs[i].seed, orbit_opts);
            r.orbit_valid = po.valid();
            r.certificate = shadow_point(sys, scales, po, shadow_opts);
            r.ok = r.orbit_valid && r.certificate->pass;
        } catch (const Error& e) {
            r.error = e.what();
        }
    });
    return out;
}

}  // namespace pwh
