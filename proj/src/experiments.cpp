#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "pwh/assumptions.hpp"
#include "pwh/cli.hpp"
#include "pwh/errors.hpp"
#include "pwh/graphs.hpp"
#include "pwh/perturbation.hpp"
#include "pwh/splitting.hpp"
#include "pwh/stability.hpp"
#include "pwh/systems.hpp"

namespace pwh {

namespace {

using nlohmann::json;

constexpr double kTwoPi = 6.283185307179586;

std::string num(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

json point_json(const Point& p) { return json::array({p.u, p.v}); }

/// splitmix64 finalizer: independent-looking seeds for job i of a run.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t i) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (i + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SystemSpec make_system(const SystemConfig& c) {
    if (c.kind == SystemKind::cat) return build_cat_map();
    SlowdownOptions opts;
    opts.blend_start = c.blend_start;
    return build_slowdown_map(c.slow_radius, c.slow_exponent, opts);
}

OrbitOptions orbit_options(const RunConfig& cfg) {
    OrbitOptions o;
    o.mode = cfg.orbit.mode;
    o.d_min = cfg.orbit.d_min;
    o.n_iters = cfg.system.n_iters;
    o.product_threshold = cfg.orbit.product_threshold;
    o.refine_delta = cfg.orbit.refine_delta;
    return o;
}

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    double uniform() { return unit_(rng_); }

    TangentVector direction() {
        const double th = kTwoPi * uniform();
        return {std::cos(th), std::sin(th)};
    }

    /// Uniform on the torus, rejecting points closer than d_min to the excluded set.
    Point away_from(const SystemSpec& sys, double d_min) {
        for (;;) {
            const Point x{uniform(), uniform()};
            if (boundary_dist_or_zero(x, sys.domain()) >= d_min) return x;
        }
    }

    /// Uniform points, plus (on domains with excluded points) every other sample in the
    /// annulus [d_min, reach] around an excluded point, where the scale functions vary.
    Point mixed(const SystemSpec& sys, double d_min, double reach, std::size_t i) {
        const auto& excluded = sys.domain().excluded_points;
        if (sys.domain().is_full() || i % 2 == 0) return away_from(sys, d_min);
        const Point& p = excluded[static_cast<std::size_t>(uniform() * excluded.size()) % excluded.size()];
        for (;;) {
            const double r = d_min + (reach - d_min) * uniform();
            const Point x = exp_map(p, r * direction());
            if (boundary_dist_or_zero(x, sys.domain()) >= d_min) return x;
        }
    }

private:
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

/// Counts library errors by code, keeping the first message of each.
class ErrorTally {
public:
    void add(const std::string& message) {
        const std::string code = message.substr(0, message.find(':'));
        auto& [count, first] = tally_[code];
        if (count++ == 0) first = message;
    }
    int total() const {
        int n = 0;
        for (const auto& [code, entry] : tally_) n += entry.first;
        return n;
    }
    json to_json() const {
        json out = json::object();
        for (const auto& [code, entry] : tally_) out[code] = {{"count", entry.first}, {"first", entry.second}};
        return out;
    }

private:
    std::map<std::string, std::pair<int, std::string>> tally_;
};

void check(ExperimentResult& r, std::string name, bool pass, std::string detail) {
    r.assertions.push_back({std::move(name), pass, std::move(detail)});
}

/// Q must not increase as base points approach the excluded set.
void check_q_monotone(ExperimentResult& r, const SystemSpec& sys, const ScaleParams& sc,
                      const std::vector<Point>& points) {
    if (sys.domain().is_full()) return;
    std::vector<std::pair<double, double>> dq;
    for (const Point& x : points) dq.emplace_back(boundary_dist(x, sys.domain()), q_at(sc, sys, x));
    std::sort(dq.begin(), dq.end());
    int violations = 0;
    for (std::size_t i = 1; i < dq.size(); ++i) violations += dq[i].second < dq[i - 1].second;
    const double q_min = dq.empty() ? 0.0 : dq.front().second;
    const double q_max = dq.empty() ? 0.0 : dq.back().second;
    r.results["q_monotonicity"] = {{"points", dq.size()},
                                   {"violations", violations},
                                   {"d_min", dq.empty() ? 0.0 : dq.front().first},
                                   {"q_at_d_min", q_min},
                                   {"q_max", q_max}};
    // Below r0 the scale must actually shrink, not just stay ordered.
    const bool inside_r0 = !dq.empty() && dq.front().first < sc.r0;
    check(r, "q_monotone_in_boundary_distance", violations == 0 && (!inside_r0 || q_min < q_max),
          std::to_string(violations) + " order violations; Q from " + num(q_min) + " to " + num(q_max));
}

json scales_json(const ScaleParams& s) {
    return {{"alpha", s.alpha}, {"beta", s.beta},   {"gamma", s.gamma}, {"delta", s.delta},
            {"eps", s.eps},     {"r0", s.r0},       {"c_u", s.c_u},     {"c_s", s.c_s},
            {"c_f", s.c_f},     {"c_0", s.c_0},     {"rho", s.rho},     {"q_max", s.q_max()}};
}

// ---------------------------------------------------------------------------------------------
// scales-check

void scales_check(const RunConfig& cfg, const SystemSpec& sys, const ScaleParams& sc, ExperimentResult& r) {
    Sampler smp(mix_seed(cfg.seed, 1));
    const double reach = std::min(2.0 * sc.r0, 0.45);
    std::vector<Point> pts;
    for (int i = 0; i < cfg.scales_check.samples; ++i)
        pts.push_back(smp.mixed(sys, cfg.orbit.d_min, reach, static_cast<std::size_t>(i)));

    const RateMarginReport rm = check_rate_margins(sc, sys, pts, cfg.orbit.d_min, cfg.system.n_iters, cfg.exec);
    json rmj = {{"pass", rm.pass},
                {"samples", rm.samples.size()},
                {"skipped", rm.skipped},
                {"failures", rm.failures},
                {"c0_fit", rm.c0_fit},
                {"eps_threshold", rm.eps_threshold},
                {"a0", rm.a0},
                {"a1", rm.a1},
                {"a2", rm.a2},
                {"b", rm.b},
                {"smallness_applicable", rm.smallness_applicable},
                {"smallness_value", rm.smallness_value}};
    if (rm.worst) {
        rmj["worst"] = {{"x", point_json(rm.worst->x)},
                        {"d_boundary", rm.worst->d_boundary},
                        {"lhs", rm.worst->lhs},
                        {"min_side", rm.worst->min_side},
                        {"slack", rm.worst->slack}};
    }
    r.results["rate_margins"] = rmj;
    check(r, "rate_margins", rm.pass,
          std::to_string(rm.failures) + " failures in " + std::to_string(rm.samples.size() - rm.skipped) +
              " samples; fitted C0 = " + num(rm.c0_fit));

    const std::vector<EpsSweepStep> sweep = eps_threshold_sweep(sc, rm, cfg.scales_check.bisections);
    std::vector<EpsSweepStep> sorted = sweep;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.eps < b.eps; });
    int monotone_violations = 0;
    for (std::size_t i = 1; i < sorted.size(); ++i) monotone_violations += sorted[i].failures < sorted[i - 1].failures;
    json sj = json::array();
    for (const auto& s : sweep) sj.push_back({{"eps", s.eps}, {"failures", s.failures}});
    double onset = 0.0;
    for (const auto& s : sorted) {
        if (s.failures > 0) {
            onset = s.eps;
            break;
        }
    }
    r.results["eps_sweep"] = {{"steps", sj}, {"onset", onset}};
    check(r, "eps_sweep_monotone", monotone_violations == 0 && onset > 0.0,
          "failure onset at eps = " + num(onset) + ", " + std::to_string(monotone_violations) + " order violations");

    std::vector<std::pair<Point, Point>> pairs;
    for (int i = 0; i < cfg.scales_check.pairs; ++i) {
        const Point x = smp.mixed(sys, cfg.orbit.d_min, reach, static_cast<std::size_t>(i));
        const double rad = q_at(sc, sys, x) * std::sqrt(smp.uniform());
        pairs.emplace_back(x, exp_map(x, rad * smp.direction()));
    }
    const QComparabilityReport qc = check_q_comparability(sc, sys, pairs);
    r.results["q_comparability"] = {{"pass", qc.pass},
                                    {"tested", qc.tested},
                                    {"excluded", qc.excluded},
                                    {"min_ratio", qc.min_ratio},
                                    {"max_ratio", qc.max_ratio},
                                    {"smallness_lower", qc.smallness_lower},
                                    {"smallness_upper", qc.smallness_upper}};
    check(r, "q_comparability", qc.pass && qc.tested > 0,
          "Q(y)/Q(x) in [" + num(qc.min_ratio) + ", " + num(qc.max_ratio) + "] over " + std::to_string(qc.tested) +
              " pairs");

    // eps(x) and Q(x) as functions of the boundary distance: nondecreasing, Q below d.
    int bad = 0;
    double prev_e = 0.0, prev_q = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double d = std::pow(10.0, -8.0 + 8.0 * k / 999.0);
        const double e = eps_fn(sc, d);
        const double q = q_fn(sc, d);
        bad += (e < prev_e) + (q < prev_q) + (!sys.domain().is_full() && !(q < d));
        prev_e = e;
        prev_q = q;
    }
    check(r, "scale_functions_monotone", bad == 0, std::to_string(bad) + " violations on 1000 distances");
}

// ---------------------------------------------------------------------------------------------
// split

void split(const RunConfig& cfg, const SystemSpec& sys, const ScaleParams& sc, ExperimentResult& r) {
    struct Sample {
        Point x;
        bool skipped = false;
        double invariance = 0.0;
        double frame_det = 0.0;
        double m_u = 0.0, n_s = 0.0;
        bool aperture_ok = false;
        std::string error;
    };
    const int n = cfg.split.grid;
    std::vector<Sample> out(static_cast<std::size_t>(n * n));
    for_each_index(out.size(), cfg.exec, [&](std::size_t k) {
        Sample& s = out[k];
        s.x = Point{(static_cast<double>(k / n) + 0.5) / n, (static_cast<double>(k % n) + 0.5) / n};
        if (boundary_dist_or_zero(s.x, sys.domain()) < cfg.orbit.d_min) {
            s.skipped = true;
            return;
        }
        try {
            const Splitting sx = compute_splitting(sys, s.x, cfg.system.n_iters);
            const MapStep step = sys.forward_step(s.x);
            const Splitting sfx = compute_splitting(sys, step.image, cfg.system.n_iters);
            const double err_u = std::abs((step.jacobian * sx.e_u).normalized().cross(sfx.e_u));
            const double err_s = std::abs((step.jacobian * sx.e_s).normalized().cross(sfx.e_s));
            s.invariance = std::max(err_u, err_s);
            s.frame_det = sx.frame_det();
            s.m_u = sx.m_u;
            s.n_s = sx.n_s;
            cone_aperture(sx, eps_eps_at(sc, sys, s.x));
            s.aperture_ok = true;
        } catch (const Error& e) {
            s.error = e.what();
        }
    });
    ErrorTally errors;
    int tested = 0, aperture_bad = 0;
    double worst_inv = 0.0, min_det = 1.0, min_mu = INFINITY, max_ns = 0.0;
    for (const Sample& s : out) {
        if (s.skipped) continue;
        ++tested;
        if (!s.error.empty()) {
            errors.add(s.error);
            continue;
        }
        worst_inv = std::max(worst_inv, s.invariance);
        min_det = std::min(min_det, s.frame_det);
        min_mu = std::min(min_mu, s.m_u);
        max_ns = std::max(max_ns, s.n_s);
        aperture_bad += !s.aperture_ok;
    }
    r.results["splitting"] = {{"grid", n},           {"tested", tested},         {"errors", errors.to_json()},
                              {"max_invariance_error", worst_inv}, {"min_frame_det", min_det},
                              {"min_m_u", min_mu},   {"max_n_s", max_ns}};
    check(r, "splitting_defined", errors.total() == 0,
          std::to_string(errors.total()) + " of " + std::to_string(tested) + " grid points failed");
    check(r, "splitting_invariance", errors.total() == 0 && worst_inv <= 1e-9,
          "max sine between Df E(x) and E(fx) = " + num(worst_inv));
    check(r, "cone_apertures_positive", errors.total() == 0 && aperture_bad == 0,
          std::to_string(aperture_bad) + " nonpositive apertures");

    AssumptionOptions ao;
    ao.resolution = cfg.split.resolution;
    ao.window = cfg.split.window;
    ao.pi_min = cfg.split.pi_min;
    ao.inner_fraction = cfg.split.inner_fraction;
    ao.n_iters = cfg.system.n_iters;
    ao.exec = cfg.exec;
    const AssumptionReport ar = verify_assumptions(sys, sc, ao);
    auto products = [](const std::vector<ProductSample>& v) {
        double fwd = 0.0, bwd = 0.0;
        int failed = 0;
        for (const auto& p : v) {
            fwd = std::max(fwd, p.forward);
            bwd = std::max(bwd, p.backward);
            failed += !p.pass;
        }
        return json{{"samples", v.size()}, {"failed", failed}, {"max_forward", fwd}, {"max_backward", bwd}};
    };
    auto witness = [](const RateWitness& w) {
        json j = {{"pass", w.pass},   {"vacuous", w.vacuous},         {"tested", w.tested}, {"c_fit", w.c_fit},
                  {"beta", w.beta},   {"gamma", w.gamma},             {"worst_slack", w.worst_slack}};
        if (w.worst_point) j["worst_point"] = point_json(*w.worst_point);
        return j;
    };
    json counter = json::array();
    for (std::size_t i = 0; i < ar.counterexamples.size() && i < 10; ++i)
        counter.push_back(point_json(ar.counterexamples[i]));
    r.results["assumptions"] = {{"u1", products(ar.u1)},
                                {"s1", products(ar.s1)},
                                {"u2", witness(ar.u2)},
                                {"s2", witness(ar.s2)},
                                {"r_pass", ar.r_pass},
                                {"r_margin", ar.r_margin},
                                {"k_pass", ar.k_pass},
                                {"k_slack", ar.k_slack},
                                {"holder_fit", ar.holder_fit},
                                {"counterexamples", counter}};
    check(r, "assumption_u1_products", ar.u1_pass, std::to_string(ar.u1.size()) + " samples");
    check(r, "assumption_s1_products", ar.s1_pass, std::to_string(ar.s1.size()) + " samples");
    auto rate_detail = [](const RateWitness& w) {
        if (w.vacuous) return std::string("vacuous: no samples near the boundary");
        return std::to_string(w.tested) + " samples, fitted C = " + num(w.c_fit) + ", slack " + num(w.worst_slack);
    };
    check(r, "assumption_u2_rates", ar.u2.pass, rate_detail(ar.u2));
    check(r, "assumption_s2_rates", ar.s2.pass, rate_detail(ar.s2));
    check(r, "assumption_r_exponents", ar.r_pass, "alpha - beta/gamma - delta = " + num(ar.r_margin));
    check(r, "assumption_k_distortion", ar.k_pass, "slack " + num(ar.k_slack));
}

// ---------------------------------------------------------------------------------------------
// grow-manifold

/// Random graph Q (a0 + a1 t + a2 t^2), t = v/Q, admissible for the default scales.
AdmissibleManifold random_graph(Sampler& smp, const Point& base, ManifoldKind kind, double radius,
                                const Splitting& frame, const ScaleParams& sc) {
    for (;;) {
        const double a0 = 5e-4 * (2.0 * smp.uniform() - 1.0);
        const double a1 = 0.1 * (2.0 * smp.uniform() - 1.0);
        const double a2 = 0.02 * (2.0 * smp.uniform() - 1.0);
        AdmissibleManifold w = AdmissibleManifold::from_function(base, kind, radius, frame, [&](double v) {
            const double t = v / radius;
            return radius * (a0 + t * (a1 + a2 * t));
        });
        if (admissibility_check(w, sc).pass) return w;
    }
}

void grow_manifold(const RunConfig& cfg, const SystemSpec& sys, const ScaleParams& sc, ExperimentResult& r) {
    const OrbitOptions oo = orbit_options(cfg);
    const GrowManifoldConfig& gc = cfg.grow_manifold;

    // Local manifolds of one noisy orbit, written out as plot data.
    {
        Sampler smp(mix_seed(cfg.seed, 2));
        const Point x0 = smp.away_from(sys, std::max(cfg.orbit.d_min, cfg.shadow.min_base_distance));
        json mj = {{"x0", point_json(x0)}, {"window", gc.window}, {"kick_fraction", gc.kick_fraction}};
        try {
            const PseudoOrbit po = make_noisy_orbit(sys, sc, x0, gc.window, gc.kick_fraction, mix_seed(cfg.seed, 3), oo);
            const ManifoldLimit wu = local_unstable_manifold(sys, sc, po);
            const ManifoldLimit ws = local_stable_manifold(sys, sc, po);
            const AdmissibilityReport au = admissibility_check(wu.manifold, sc);
            const AdmissibilityReport as = admissibility_check(ws.manifold, sc);
            auto desc = [](const ManifoldLimit& m, const AdmissibilityReport& a) {
                return json{{"depth", m.depth},          {"increment", m.increment},
                            {"product_bound", m.product_bound}, {"radius", m.manifold.radius},
                            {"admissible", a.pass},       {"max_dphi", a.max_dphi},
                            {"holder", a.holder}};
            };
            mj["unstable"] = desc(wu, au);
            mj["stable"] = desc(ws, as);
            std::ostringstream cu, cs;
            write_manifold_csv(wu.manifold, cu);
            write_manifold_csv(ws.manifold, cs);
            r.csv.push_back({"wu", cu.str()});
            r.csv.push_back({"ws", cs.str()});
            check(r, "local_manifolds_admissible", au.pass && as.pass,
                  "depths " + std::to_string(wu.depth) + "/" + std::to_string(ws.depth) + ", increments " +
                      num(wu.increment) + "/" + num(ws.increment));
        } catch (const Error& e) {
            mj["error"] = e.what();
            check(r, "local_manifolds_admissible", false, e.what());
        }
        r.results["manifolds"] = mj;
    }

    // Contraction of the graph transform at random pairs of admissible graphs, y = f(x).
    struct Pair {
        bool unstable = true;
        ContractionReport report;
        std::string error;
    };
    std::vector<Pair> pairs(static_cast<std::size_t>(gc.pairs));
    const double reach = std::min(2.0 * sc.r0, 0.45);
    for_each_index(pairs.size(), cfg.exec, [&](std::size_t i) {
        Sampler smp(mix_seed(cfg.seed, 1000 + i));
        Pair& p = pairs[i];
        p.unstable = i % 2 == 0;
        try {
            const Point x = smp.mixed(sys, cfg.orbit.d_min, reach, i / 2);
            const Point y = sys.forward(x);
            const Splitting sx = compute_splitting(sys, x, cfg.system.n_iters);
            const Splitting sy = compute_splitting(sys, y, cfg.system.n_iters);
            const LocalMapData lm = local_map_with_frames(sys, sc, x, y, sx, sy);
            const ManifoldKind kind = p.unstable ? ManifoldKind::unstable : ManifoldKind::stable;
            const Point& base = p.unstable ? x : y;
            const Splitting& frame = p.unstable ? sx : sy;
            const double radius = p.unstable ? lm.q_x : lm.q_y;
            const AdmissibleManifold w1 = random_graph(smp, base, kind, radius, frame, sc);
            const AdmissibleManifold w2 = random_graph(smp, base, kind, radius, frame, sc);
            p.report = contraction_factor(lm, w1, w2);
        } catch (const Error& e) {
            p.error = e.what();
        }
    });
    ErrorTally errors;
    int failed = 0;
    double max_factor = 0.0, worst_margin = -INFINITY, min_bound = INFINITY, max_bound = 0.0;
    for (const Pair& p : pairs) {
        if (!p.error.empty()) {
            errors.add(p.error);
            continue;
        }
        failed += !p.report.pass;
        max_factor = std::max(max_factor, p.report.factor);
        worst_margin = std::max(worst_margin, p.report.factor - p.report.bound - p.report.tolerance);
        min_bound = std::min(min_bound, p.report.bound);
        max_bound = std::max(max_bound, p.report.bound);
    }
    r.results["contraction"] = {{"pairs", pairs.size()},         {"failed", failed},
                                {"errors", errors.to_json()},    {"max_factor", max_factor},
                                {"worst_margin", worst_margin},  {"min_bound", min_bound},
                                {"max_bound", max_bound}};
    check(r, "contraction_bound", failed == 0 && errors.total() == 0,
          std::to_string(failed) + " above bound, " + std::to_string(errors.total()) + " errors in " +
              std::to_string(pairs.size()) + " pairs; max factor - bound - 2h = " + num(worst_margin));

    // On the linear map the transform of a linear graph is linear with a closed-form slope.
    if (cfg.system.kind != SystemKind::cat) return;
    Sampler smp(mix_seed(cfg.seed, 4));
    double worst = 0.0;
    int tested = 0;
    for (int k = 0; k < 4; ++k) {
        const Point x = smp.away_from(sys, cfg.orbit.d_min);
        const Point y = sys.forward(x);
        const Splitting sx = compute_splitting(sys, x, cfg.system.n_iters);
        const Splitting sy = compute_splitting(sys, y, cfg.system.n_iters);
        const LocalMapData lm = local_map_with_frames(sys, sc, x, y, sx, sy);
        const Mat2 inv = lm.blocks().inverse();
        for (int j = 0; j < gc.linear_slopes; ++j) {
            const double s = -0.2 + 0.4 * j / (gc.linear_slopes - 1);
            auto line = [s](double v) { return s * v; };
            const AdmissibleManifold tu =
                graph_transform_u(lm, AdmissibleManifold::from_function(x, ManifoldKind::unstable, lm.q_x, sx, line));
            const double pu = (lm.d_su + lm.d_ss * s) / (lm.d_uu + lm.d_us * s);
            const AdmissibleManifold ts =
                graph_transform_s(lm, AdmissibleManifold::from_function(y, ManifoldKind::stable, lm.q_y, sy, line));
            const double ps = (inv.a12 + inv.a11 * s) / (inv.a22 + inv.a21 * s);
            for (int i = 0; i < tu.size(); ++i)
                worst = std::max(worst, std::abs(tu.phi[static_cast<std::size_t>(i)] - pu * tu.node(i)) / tu.radius);
            for (int i = 0; i < ts.size(); ++i)
                worst = std::max(worst, std::abs(ts.phi[static_cast<std::size_t>(i)] - ps * ts.node(i)) / ts.radius);
            tested += 2;
        }
    }
    r.results["linear_slope_map"] = {{"graphs", tested}, {"max_slope_error", worst}};
    check(r, "linear_slope_map", worst <= 1e-12,
          "max slope error " + num(worst) + " over " + std::to_string(tested) + " linear graphs");
}

// ---------------------------------------------------------------------------------------------
// shadow

void write_orbit_csv(const PseudoOrbit& po, const ShadowCertificate* cert, std::ostream& out) {
    out << "n,x_u,x_v,z_u,z_v,gap,bound,backward_gap,backward_bound\n";
    char buf[320];
    for (int n = -po.K; n <= po.K; ++n) {
        const Point& x = po.at(n);
        const Point z = cert ? cert->orbit[static_cast<std::size_t>(n + po.K)] : Point{};
        std::string z_cols = cert ? "" : ",";
        if (cert) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", z.u, z.v);
            z_cols = buf;
        }
        std::string step_cols = ",,,";
        if (n < po.K) {
            const StepCheck& s = po.steps[static_cast<std::size_t>(n + po.K)];
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", s.forward_gap, s.forward_bound, s.backward_gap,
                          s.backward_bound);
            step_cols = buf;
        }
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,", n, x.u, x.v);
        out << buf << z_cols << ',' << step_cols << '\n';
    }
}

void shadow(const RunConfig& cfg, const SystemSpec& sys, const ScaleParams& sc, ExperimentResult& r) {
    const ShadowConfig& sh = cfg.shadow;
    const OrbitOptions oo = orbit_options(cfg);
    Sampler smp(mix_seed(cfg.seed, 5));
    std::vector<ShadowJob> jobs;
    std::vector<Point> bases;
    for (int i = 0; i < sh.orbits; ++i) {
        ShadowJob job;
        job.x0 = smp.away_from(sys, std::max(cfg.orbit.d_min, sh.min_base_distance));
        job.K = sh.window;
        job.kick_fraction = sh.kick_fractions[static_cast<std::size_t>(i) % sh.kick_fractions.size()];
        job.seed = mix_seed(cfg.seed, 10000 + static_cast<std::uint64_t>(i));
        jobs.push_back(job);
        bases.push_back(job.x0);
    }
    const std::vector<ShadowJobResult> res = certify_batch(sys, sc, jobs, oo, ShadowOptions{}, cfg.exec);

    struct Group {
        int orbits = 0, certified = 0;
        double worst_ratio = 0.0, max_box_ratio = 0.0, max_orbit_residual = 0.0;
        int min_horizon = std::numeric_limits<int>::max(), min_direct_horizon = std::numeric_limits<int>::max();
    };
    std::map<double, Group> groups;
    ErrorTally errors;
    int certified = 0, invalid_orbits = 0;
    double zero_kick_dist = 0.0;
    int zero_kick = 0;
    for (const ShadowJobResult& jr : res) {
        Group& g = groups[jr.job.kick_fraction];
        ++g.orbits;
        if (!jr.error.empty()) errors.add(jr.error);
        if (!jr.orbit_valid) ++invalid_orbits;
        if (jr.ok) {
            ++certified;
            ++g.certified;
        }
        if (!jr.certificate) continue;
        const ShadowCertificate& c = *jr.certificate;
        g.worst_ratio = std::max(g.worst_ratio, c.distance_to_x0 / c.q_x0);
        g.max_box_ratio = std::max(g.max_box_ratio, c.max_box_ratio);
        g.max_orbit_residual = std::max(g.max_orbit_residual, c.orbit_residual);
        g.min_horizon = std::min(g.min_horizon, c.containment_horizon);
        g.min_direct_horizon = std::min(g.min_direct_horizon, c.direct_horizon);
        if (jr.job.kick_fraction == 0.0) {
            ++zero_kick;
            zero_kick_dist = std::max(zero_kick_dist, c.distance_to_x0);
        }
    }
    json gj = json::array();
    double worst_ratio = 0.0;
    for (const auto& [kick, g] : groups) {
        worst_ratio = std::max(worst_ratio, g.worst_ratio);
        gj.push_back({{"kick_fraction", kick},
                      {"orbits", g.orbits},
                      {"certified", g.certified},
                      {"worst_distance_over_q", g.worst_ratio},
                      {"max_box_ratio", g.max_box_ratio},
                      {"max_orbit_residual", g.max_orbit_residual},
                      {"min_containment_horizon", g.certified ? g.min_horizon : 0},
                      {"min_direct_horizon", g.certified ? g.min_direct_horizon : 0}});
    }
    r.results["shadow"] = {{"orbits", res.size()},     {"window", sh.window},           {"certified", certified},
                           {"invalid_orbits", invalid_orbits}, {"worst_distance_over_q", worst_ratio},
                           {"by_kick", gj},             {"errors", errors.to_json()},
                           {"refine_delta", cfg.orbit.refine_delta}};
    check(r, "shadows_certified", certified == static_cast<int>(res.size()),
          std::to_string(certified) + "/" + std::to_string(res.size()) +
              " orbits with d(x, x0) <= Q(x0)/50 and full box containment; worst d/Q = " + num(worst_ratio));
    if (zero_kick > 0) {
        r.results["zero_noise"] = {{"orbits", zero_kick}, {"max_distance", zero_kick_dist}};
        check(r, "zero_noise_identity", zero_kick_dist <= 1e-12,
              "max d(shadow, x0) = " + num(zero_kick_dist) + " over " + std::to_string(zero_kick) + " true orbits");
    }
    check_q_monotone(r, sys, sc, bases);

    // Linear-map oracle: the banded linear solve gives the same shadow.
    if (cfg.system.kind == SystemKind::cat && sh.linear_orbits > 0) {
        std::vector<std::size_t> picks;
        for (std::size_t i = 0; i < res.size() && static_cast<int>(picks.size()) < sh.linear_orbits; ++i)
            if (res[i].ok && res[i].job.kick_fraction > 0.0) picks.push_back(i);
        std::vector<double> diffs(picks.size(), INFINITY);
        for_each_index(picks.size(), cfg.exec, [&](std::size_t k) {
            const ShadowJob& job = res[picks[k]].job;
            const PseudoOrbit po = make_noisy_orbit(sys, sc, job.x0, job.K, job.kick_fraction, job.seed, oo);
            diffs[k] = torus_dist(linearized_shadow(sys, sc, po).shadow, res[picks[k]].certificate->shadow);
        });
        const double worst = diffs.empty() ? INFINITY : *std::max_element(diffs.begin(), diffs.end());
        r.results["linearized_shadow"] = {{"orbits", picks.size()}, {"max_difference", worst}};
        check(r, "linearized_shadow_oracle", worst <= 1e-12,
              "max d(shadow, linear solve) = " + num(worst) + " over " + std::to_string(picks.size()) + " orbits");
    }

    // Plot data for the first orbit.
    std::ostringstream csv;
    try {
        const ShadowJob& job = jobs.front();
        const PseudoOrbit po = make_noisy_orbit(sys, sc, job.x0, job.K, job.kick_fraction, job.seed, oo);
        write_orbit_csv(po, res.front().certificate ? &*res.front().certificate : nullptr, csv);
    } catch (const Error&) {
        csv.str("");
        csv << "n,x_u,x_v,z_u,z_v,gap,bound,backward_gap,backward_bound\n";
    }
    r.csv.push_back({"orbit", csv.str()});
}

// ---------------------------------------------------------------------------------------------
// expansivity

void expansivity(const RunConfig& cfg, const SystemSpec& sys, const ScaleParams& sc, ExperimentResult& r) {
    const ExpansivityConfig& ec = cfg.expansivity;
    Sampler smp(mix_seed(cfg.seed, 6));
    std::vector<std::pair<Point, Point>> pairs;
    std::vector<Point> bases;
    for (int i = 0; i < ec.pairs; ++i) {
        const Point x = smp.away_from(sys, std::max(cfg.orbit.d_min, ec.min_base_distance));
        pairs.emplace_back(x, exp_map(x, ec.separation * smp.direction()));
        bases.push_back(x);
    }
    struct Outcome {
        ExpansivityVerdict distinct, same;
        std::string error;
    };
    std::vector<Outcome> out(pairs.size());
    for_each_index(pairs.size(), cfg.exec, [&](std::size_t i) {
        try {
            out[i].distinct = expansivity_test(sys, sc, pairs[i].first, pairs[i].second, ec.window);
            out[i].same = expansivity_test(sys, sc, pairs[i].first, pairs[i].first, ec.window);
        } catch (const Error& e) {
            out[i].error = e.what();
        }
    });
    ErrorTally errors;
    int separated = 0, same_separated = 0, max_n = 0;
    std::map<int, int> histogram;
    for (const Outcome& o : out) {
        if (!o.error.empty()) {
            errors.add(o.error);
            continue;
        }
        if (o.distinct.separated) {
            ++separated;
            max_n = std::max(max_n, std::abs(o.distinct.n));
            ++histogram[o.distinct.n];
        }
        same_separated += o.same.separated;
    }
    json hj = json::object();
    for (const auto& [n, c] : histogram) hj[std::to_string(n)] = c;
    r.results["expansivity"] = {{"pairs", pairs.size()},       {"separation", ec.separation},
                                {"window", ec.window},         {"separated", separated},
                                {"max_abs_n", max_n},          {"separating_times", hj},
                                {"identical_separated", same_separated}, {"errors", errors.to_json()}};
    check(r, "pairs_separate", separated == static_cast<int>(pairs.size()),
          std::to_string(separated) + "/" + std::to_string(pairs.size()) + " separated within |n| <= " +
              std::to_string(ec.window) + "; largest |n| = " + std::to_string(max_n));
    check(r, "identical_points_never_separate", same_separated == 0 && errors.total() == 0,
          std::to_string(same_separated) + " identical pairs separated");
    check_q_monotone(r, sys, sc, bases);
}

// ---------------------------------------------------------------------------------------------
// perturb-verify and conjugacy share the bump

BumpParams bump_params(const PerturbationConfig& pc) {
    BumpParams b;
    b.center = Point{pc.center_u, pc.center_v};
    b.radius = pc.radius;
    b.direction_angle = pc.direction_angle;
    return b;
}

PerturbationOptions perturbation_options(const RunConfig& cfg) {
    PerturbationOptions po;
    po.xi0 = cfg.perturbation.xi0;
    po.grid = cfg.perturbation.budget_grid;
    po.n_iters = cfg.system.n_iters;
    po.exec = cfg.exec;
    return po;
}

/// Builds g at the configured fraction of the largest admissible amplitude; nullopt after
/// recording a failed "budget" assertion.
std::optional<SystemSpec> perturbed_system(const RunConfig& cfg, const SystemSpec& f, const ScaleParams& sc,
                                           ExperimentResult& r, double& amax) {
    BumpParams bump = bump_params(cfg.perturbation);
    const PerturbationOptions popts = perturbation_options(cfg);
    amax = max_bump_amplitude(f, sc, bump, popts);
    bump.amplitude = cfg.perturbation.amplitude_fraction * amax;
    json bj = {{"center", point_json(bump.center)},
               {"radius", bump.radius},
               {"direction_angle", bump.direction_angle},
               {"max_amplitude", amax},
               {"amplitude_fraction", cfg.perturbation.amplitude_fraction},
               {"amplitude", bump.amplitude}};
    try {
        auto [g, budget] = build_perturbation(f, sc, bump, popts);
        bj["budget_worst_ratio"] = budget.worst_ratio;
        if (budget.worst_point) bj["budget_worst_point"] = point_json(*budget.worst_point);
        r.results["bump"] = bj;
        check(r, "perturbation_budget", budget.worst_ratio <= 1.0,
              "worst gap/bound = " + num(budget.worst_ratio) + " at amplitude " + num(bump.amplitude));
        return g;
    } catch (const Error& e) {
        bj["error"] = e.what();
        r.results["bump"] = bj;
        check(r, "perturbation_budget", false, e.what());
        return std::nullopt;
    }
}

void perturb_verify(const RunConfig& cfg, const SystemSpec& f, const ScaleParams& sc, ExperimentResult& r) {
    double amax = 0.0;
    const std::optional<SystemSpec> g = perturbed_system(cfg, f, sc, r, amax);
    if (!g) return;
    if (amax > 0.0) {
        BumpParams over = bump_params(cfg.perturbation);
        over.amplitude = 2.0 * amax;
        bool rejected = false;
        try {
            build_perturbation(f, sc, over, perturbation_options(cfg));
        } catch (const Error& e) {
            rejected = e.code() == ErrorCode::BudgetExceeded;
        }
        check(r, "overbudget_rejected", rejected, "amplitude " + num(over.amplitude) + " (200% of the budget)");
    }

    const ConeFamily cones(f, sc, cfg.system.n_iters);
    struct Sample {
        bool skipped = false;
        ConeCheck cone;
        GrowthCheck growth;
        Splitting split;
        bool extracted = false;
        std::string error;
    };
    const int n = cfg.perturbation.grid;
    std::vector<Sample> out(static_cast<std::size_t>(n * n));
    for_each_index(out.size(), cfg.exec, [&](std::size_t k) {
        Sample& s = out[k];
        const Point x{(static_cast<double>(k / n) + 0.5) / n, (static_cast<double>(k % n) + 0.5) / n};
        if (boundary_dist_or_zero(x, f.domain()) < cfg.orbit.d_min) {
            s.skipped = true;
            return;
        }
        try {
            s.cone = cone_invariance_check(*g, cones, x);
            s.growth = cone_growth_check(*g, cones, x);
            s.split = perturbed_splitting(*g, cones, x, cfg.system.n_iters);
            s.extracted = true;
        } catch (const Error& e) {
            s.error = e.what();
        }
    });
    ErrorTally errors;
    int tested = 0, cone_bad = 0, growth_bad = 0, rates_bad = 0;
    double min_cone = INFINITY, min_growth = INFINITY, min_mu = INFINITY, max_ns = 0.0;
    for (const Sample& s : out) {
        if (s.skipped) continue;
        ++tested;
        if (!s.error.empty()) {
            errors.add(s.error);
            continue;
        }
        cone_bad += !s.cone.pass;
        growth_bad += !s.growth.pass;
        min_cone = std::min({min_cone, s.cone.margin_u, s.cone.margin_s});
        min_growth = std::min({min_growth, s.growth.margin_u, s.growth.margin_s});
        min_mu = std::min(min_mu, s.split.m_u);
        max_ns = std::max(max_ns, s.split.n_s);
        rates_bad += !(s.split.m_u > 1.0 && s.split.n_s < 1.0);
    }
    const int errs = errors.total();
    r.results["cones"] = {{"grid", n},
                          {"tested", tested},
                          {"errors", errors.to_json()},
                          {"invariance_failures", cone_bad},
                          {"growth_failures", growth_bad},
                          {"min_invariance_margin", min_cone},
                          {"min_growth_margin", min_growth},
                          {"min_m_u", min_mu},
                          {"max_n_s", max_ns}};
    const std::string of = " of " + std::to_string(tested) + " grid points";
    check(r, "cone_invariance", errs == 0 && cone_bad == 0,
          std::to_string(cone_bad + errs) + " failures" + of + "; min margin " + num(min_cone));
    check(r, "box_norm_growth", errs == 0 && growth_bad == 0,
          std::to_string(growth_bad + errs) + " failures" + of + "; min margin over sqrt(m_u) " + num(min_growth));
    check(r, "perturbed_splitting", errs == 0, std::to_string(errs) + " extraction failures" + of);
    check(r, "perturbed_rates", errs == 0 && rates_bad == 0,
          "min m_u = " + num(min_mu) + ", max n_s = " + num(max_ns));
}

void conjugacy(const RunConfig& cfg, const SystemSpec& f, const ScaleParams& sc, ExperimentResult& r) {
    const ConjugacyConfig& cc = cfg.conjugacy;
    double amax = 0.0;
    const std::optional<SystemSpec> g = perturbed_system(cfg, f, sc, r, amax);
    if (!g) return;
    const OrbitOptions oo = orbit_options(cfg);
    const ConjugacyField field = conjugacy_field(f, *g, sc, cc.grid, cc.window, oo, ShadowOptions{}, cfg.exec);
    ErrorTally errors;
    int avoiding = 0;
    for (const ConjugacyEntry& e : field.entries) {
        if (!e.error.empty()) errors.add(e.error);
        else avoiding += e.avoids_support();
    }
    r.results["field"] = {{"grid", field.resolution},
                          {"window", field.window_K},
                          {"points", field.entries.size()},
                          {"failures", field.failures},
                          {"errors", errors.to_json()},
                          {"sup_residual", field.sup_residual},
                          {"sup_displacement", field.sup_displacement},
                          {"sup_displacement_over_q", field.sup_displacement_ratio},
                          {"points_avoiding_support", avoiding},
                          {"sup_identity_error", field.sup_identity_error}};
    check(r, "field_complete", field.failures == 0,
          std::to_string(field.failures) + " of " + std::to_string(field.entries.size()) + " grid points failed");
    check(r, "conjugacy_residual", field.failures == 0 && field.sup_residual <= kConjugacyTol,
          "sup d(h(gx), f(hx)) = " + num(field.sup_residual));
    check(r, "displacement_within_q_over_50", field.failures == 0 && field.sup_displacement_ratio <= 1.0 / 50.0,
          "sup d(hx, x)/Q(x) = " + num(field.sup_displacement_ratio));
    if (avoiding > 0) {
        check(r, "identity_off_support", field.sup_identity_error <= 1e-12,
              "sup d(hx, x) = " + num(field.sup_identity_error) + " at " + std::to_string(avoiding) +
                  " points whose windows avoid the bump");
    }

    Sampler smp(mix_seed(cfg.seed, 7));
    std::vector<std::pair<Point, Point>> pairs;
    for (int i = 0; i < cc.injectivity_pairs; ++i) {
        const Point x = smp.away_from(*g, cfg.orbit.d_min);
        pairs.emplace_back(x, exp_map(x, cc.injectivity_separation * smp.direction()));
    }
    if (!pairs.empty()) {
        const InjectivityReport inj = injectivity_probe(*g, sc, pairs, cc.injectivity_max_n);
        int max_n = 0, floor_ok = 0;
        for (const InjectivityPair& p : inj.pairs) {
            if (p.separated) max_n = std::max(max_n, std::abs(p.n0));
            floor_ok += p.lower_bound_ok;
        }
        r.results["injectivity"] = {{"pairs", pairs.size()},     {"resolved", inj.resolved},
                                    {"unresolved", inj.unresolved.size()}, {"max_abs_n", max_n},
                                    {"lower_bound_ok", floor_ok}};
        check(r, "injectivity_probe", inj.pass && inj.resolved == static_cast<int>(pairs.size()),
              std::to_string(inj.resolved) + "/" + std::to_string(pairs.size()) + " pairs separated within |n| <= " +
                  std::to_string(cc.injectivity_max_n));
    }

    const double cover = field.spacing() + field.sup_displacement;
    const SurjectivityReport sur = surjectivity_probe(field, cover);
    r.results["surjectivity"] = {{"cover_radius", cover}, {"worst_gap", sur.worst_gap}, {"uncovered", sur.uncovered}};
    check(r, "surjectivity_cover", sur.pass,
          "worst gap " + num(sur.worst_gap) + " against radius " + num(cover));

    // Continuity of h at the solved grid point nearest the bump centre.
    const Point centre{cfg.perturbation.center_u, cfg.perturbation.center_v};
    const ConjugacyEntry* probe_at = nullptr;
    for (const ConjugacyEntry& e : field.entries) {
        if (e.error.empty() && (!probe_at || torus_dist(e.x, centre) < torus_dist(probe_at->x, centre))) probe_at = &e;
    }
    if (probe_at && !cc.continuity_lambdas.empty()) {
        json cj = json::array();
        bool all = true;
        std::string detail;
        for (double lambda : cc.continuity_lambdas) {
            try {
                const int K = continuity_probe(f, sc, field, probe_at->x, lambda);
                cj.push_back({{"lambda", lambda}, {"K", K}});
                detail += (detail.empty() ? "" : ", ") + ("K(" + num(lambda) + ") = " + std::to_string(K));
            } catch (const Error& e) {
                all = false;
                cj.push_back({{"lambda", lambda}, {"error", e.what()}});
                detail += (detail.empty() ? "" : ", ") + ("K(" + num(lambda) + ") inconclusive");
            }
        }
        r.results["continuity"] = {{"x", point_json(probe_at->x)}, {"probes", cj}};
        check(r, "continuity_probe", all, detail + " at " + to_string(probe_at->x));
    }

    std::ostringstream csv;
    write_field_csv(field, csv);
    r.csv.push_back({"field", csv.str()});
}

}  // namespace

ExperimentResult run_experiment(Experiment e, const RunConfig& cfg) {
    ExperimentResult r;
    r.experiment = e;
    const SystemSpec sys = make_system(cfg.system);
    const ScaleParams sc = with_c_f(cfg.scales, sys);
    r.results["system"] = {{"name", sys.name()},
                           {"kind", cfg.system.kind == SystemKind::cat ? "cat" : "slowdown"},
                           {"excluded_points", sys.domain().excluded_points.size()}};
    r.results["scales"] = scales_json(sc);
    try {
        switch (e) {
        case Experiment::scales_check: scales_check(cfg, sys, sc, r); break;
        case Experiment::split: split(cfg, sys, sc, r); break;
        case Experiment::grow_manifold: grow_manifold(cfg, sys, sc, r); break;
        case Experiment::shadow: shadow(cfg, sys, sc, r); break;
        case Experiment::expansivity: expansivity(cfg, sys, sc, r); break;
        case Experiment::perturb_verify: perturb_verify(cfg, sys, sc, r); break;
        case Experiment::conjugacy: conjugacy(cfg, sys, sc, r); break;
        }
    } catch (const Error& err) {
        if (err.code() == ErrorCode::ConfigError || err.code() == ErrorCode::IoError) throw;
        r.results["error"] = err.what();
        check(r, "completed", false, err.what());
    }
    return r;
}

}  // namespace pwh
