#include "pwh/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "pwh/errors.hpp"

namespace pwh {

namespace {

constexpr double kPi = 3.14159265358979323846;

// g-orbit of x at indices -K .. K.
std::vector<Point> g_orbit(const SystemSpec& g, const Point& x, int K) {
    const std::size_t k = static_cast<std::size_t>(K);
    std::vector<Point> pts(2 * k + 1);
    pts[k] = x;
    for (std::size_t i = k; i + 1 < pts.size(); ++i) pts[i + 1] = g.forward(pts[i]);
    for (std::size_t i = k; i > 0; --i) pts[i - 1] = g.backward(pts[i]);
    return pts;
}

void require_valid(const PseudoOrbit& po, const Point& x) {
    if (!po.valid()) {
        int bad = 0;
        for (std::size_t i = 0; i < po.steps.size(); ++i) {
            if (!po.steps[i].ok()) {
                bad = static_cast<int>(i) - po.K;
                break;
            }
        }
        fail(ErrorCode::PseudoOrbitInvalid,
             "g-orbit window of " + to_string(x) +
                 (po.steps_ok() ? std::string(" fails the product condition") : " fails at step " + std::to_string(bad)));
    }
}

double clearance(const SystemSpec& g, const std::vector<Point>& pts) {
    const auto support = g.perturbation_support();
    if (!support) return std::numeric_limits<double>::infinity();
    double c = std::numeric_limits<double>::infinity();
    for (const Point& p : pts) c = std::min(c, torus_dist(p, support->center) - support->radius);
    return c;
}

}  // namespace

Point conjugacy_point(const SystemSpec& f, const SystemSpec& g, const ScaleParams& scales, const Point& x, int K,
                      const OrbitOptions& orbit_opts, const ShadowOptions& shadow_opts) {
    const PseudoOrbit po = pseudo_orbit_from_points(f, scales, g_orbit(g, x, K), orbit_opts);
    require_valid(po, x);
    return shadow_point(f, scales, po, shadow_opts).shadow;
}

ConjugacyField conjugacy_field(const SystemSpec& f, const SystemSpec& g, const ScaleParams& scales, int resolution,
                               int K, const OrbitOptions& orbit_opts, const ShadowOptions& shadow_opts,
                               Execution exec) {
    if (resolution < 1 || K < 1) fail(ErrorCode::ConfigError, "resolution and K must be positive");
    ConjugacyField field;
    field.resolution = resolution;
    field.window_K = K;
    for (int i = 0; i < resolution; ++i) {
        for (int j = 0; j < resolution; ++j) {
            const Point x(static_cast<double>(i) / resolution, static_cast<double>(j) / resolution);
            // Excluded points are fixed by h by definition and carry no numerical work.
            if (boundary_dist_or_zero(x, f.domain()) <= 0.0) continue;
            ConjugacyEntry e;
            e.x = x;
            field.entries.push_back(e);
        }
    }
    for_each_index(field.entries.size(), exec, [&](std::size_t idx) {
        ConjugacyEntry& e = field.entries[idx];
        try {
            e.q = q_at(scales, f, e.x);
            // One orbit window of half-width K+1 serves both windows: centred at x and at g(x).
            const std::vector<Point> pts = g_orbit(g, e.x, K + 1);
            e.support_clearance = clearance(g, pts);
            const PseudoOrbit full = pseudo_orbit_from_points(f, scales, pts, orbit_opts);
            const PseudoOrbit at_x = sub_window(full, 0, K, orbit_opts);
            const PseudoOrbit at_gx = sub_window(full, 1, K, orbit_opts);
            require_valid(at_x, e.x);
            require_valid(at_gx, pts[static_cast<std::size_t>(K) + 2]);
            const ShadowCertificate cx = shadow_point(f, scales, at_x, shadow_opts);
            const ShadowCertificate cgx = shadow_point(f, scales, at_gx, shadow_opts);
            e.h_x = cx.shadow;
            e.displacement = torus_dist(e.h_x, e.x);
            e.residual = torus_dist(cgx.shadow, f.forward(e.h_x));
            e.ok = cx.pass && cgx.pass && e.residual <= kConjugacyTol;
        } catch (const Error& err) {
            e.error = err.what();
        }
    });
    for (const ConjugacyEntry& e : field.entries) {
        if (!e.error.empty()) {
            ++field.failures;
            continue;
        }
        if (!e.ok) ++field.failures;
        field.sup_residual = std::max(field.sup_residual, e.residual);
        field.sup_displacement = std::max(field.sup_displacement, e.displacement);
        field.sup_displacement_ratio = std::max(field.sup_displacement_ratio, e.displacement / e.q);
        if (e.avoids_support()) field.sup_identity_error = std::max(field.sup_identity_error, e.displacement);
    }
    return field;
}

int continuity_probe(const SystemSpec& f, const ScaleParams& scales, const ConjugacyField& field, const Point& x,
                     double lambda, int max_K) {
    if (!(lambda > 0.0)) fail(ErrorCode::ConfigError, "lambda must be positive");
    const auto it = std::find_if(field.entries.begin(), field.entries.end(),
                                 [&](const ConjugacyEntry& e) { return torus_dist(e.x, x) < 1e-14; });
    if (it == field.entries.end() || !it->error.empty()) {
        fail(ErrorCode::ConfigError, to_string(x) + " is not a solved grid point of the field");
    }
    const Point hx = it->h_x;
    const double q0 = q_at(scales, f, hx);

    // Candidates: other h-values, and rings at radii lambda * 1.001 * 2^k up to Q around h(x)
    // so that points just outside the lambda-ball are always present.
    std::vector<Point> cand;
    for (const ConjugacyEntry& e : field.entries) {
        if (e.error.empty() && &e != &*it) cand.push_back(e.h_x);
    }
    for (double r = lambda * 1.001; r <= q0; r *= 2.0) {
        for (int k = 0; k < 16; ++k) {
            const double th = 2.0 * kPi * k / 16.0;
            cand.push_back(exp_map(hx, TangentVector{r * std::cos(th), r * std::sin(th)}));
        }
    }
    // alive[c]: candidate c has stayed within Q(f^n h(x)) of f^n h(x) for |n| <= K so far.
    std::vector<char> alive(cand.size(), 1);
    std::vector<Point> fwd(cand), bwd(cand);
    Point hf = hx, hb = hx;
    for (int K = 0; K <= max_K; ++K) {
        if (K > 0) {
            hf = f.forward(hf);
            hb = f.backward(hb);
            const double qf = q_at(scales, f, hf);
            const double qb = q_at(scales, f, hb);
            for (std::size_t c = 0; c < cand.size(); ++c) {
                if (!alive[c]) continue;
                fwd[c] = f.forward(fwd[c]);
                bwd[c] = f.backward(bwd[c]);
                if (torus_dist(fwd[c], hf) > qf || torus_dist(bwd[c], hb) > qb) alive[c] = 0;
            }
        } else {
            for (std::size_t c = 0; c < cand.size(); ++c) {
                if (torus_dist(cand[c], hx) > q0) alive[c] = 0;
            }
        }
        bool all_close = true;
        for (std::size_t c = 0; c < cand.size() && all_close; ++c) {
            if (alive[c] && !(torus_dist(cand[c], hx) < lambda)) all_close = false;
        }
        if (all_close) return K;
    }
    fail(ErrorCode::ProbeInconclusive, "lambda = " + std::to_string(lambda) + " needs K > " + std::to_string(max_K));
}

InjectivityReport injectivity_probe(const SystemSpec& g, const ScaleParams& scales,
                                    const std::vector<std::pair<Point, Point>>& pairs, int max_n) {
    InjectivityReport rep;
    const double floor = scales.q_max() / 25.0;
    for (const auto& [x, y] : pairs) {
        InjectivityPair p;
        p.x = x;
        p.y = y;
        if (torus_dist(x, y) == 0.0) {
            p.trivial = true;
            ++rep.trivial;
            rep.pairs.push_back(p);
            continue;
        }
        auto test = [&](const Point& a, const Point& b, int n) {
            const double r = q_at(scales, g, a);
            const double d = torus_dist(a, b);
            if (d > r) {
                p.separated = true;
                p.n0 = n;
                p.distance = d;
                p.radius = r;
                p.lower_bound_ok = floor < r;
            }
        };
        test(x, y, 0);
        Point fx = x, fy = y, bx = x, by = y;
        for (int n = 1; n <= max_n && !p.separated; ++n) {
            fx = g.forward(fx);
            fy = g.forward(fy);
            test(fx, fy, n);
            if (p.separated) break;
            bx = g.backward(bx);
            by = g.backward(by);
            test(bx, by, -n);
        }
        if (p.separated && p.lower_bound_ok) {
            ++rep.resolved;
        } else {
            rep.unresolved.push_back(rep.pairs.size());
        }
        rep.pairs.push_back(p);
    }
    rep.pass = rep.unresolved.empty();
    return rep;
}

SurjectivityReport surjectivity_probe(const ConjugacyField& field, double cover_radius) {
    SurjectivityReport rep;
    rep.cover_radius = cover_radius;
    const int n = field.resolution;
    std::vector<Point> images;
    for (const ConjugacyEntry& e : field.entries) {
        if (e.error.empty()) images.push_back(e.h_x);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Point c((i + 0.5) / n, (j + 0.5) / n);
            double best = std::numeric_limits<double>::infinity();
            for (const Point& p : images) best = std::min(best, torus_dist(p, c));
            if (best > rep.worst_gap) {
                rep.worst_gap = best;
                rep.worst_center = c;
            }
            if (!(best <= cover_radius)) ++rep.uncovered;
        }
    }
    rep.pass = rep.uncovered == 0;
    return rep;
}

void write_field_csv(const ConjugacyField& field, std::ostream& out) {
    out << "x_u,x_v,h_u,h_v,residual,displacement,q,ok\n";
    char buf[256];
    for (const ConjugacyEntry& e : field.entries) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", e.x.u, e.x.v, e.h_x.u,
                      e.h_x.v, e.residual, e.displacement, e.q, e.ok ? 1 : 0);
        out << buf;
    }
}

}  // namespace pwh
