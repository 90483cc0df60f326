#include "pwh/scales.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pwh/errors.hpp"
#include "pwh/graphs.hpp"
#include "pwh/splitting.hpp"

namespace pwh {

void ScaleParams::validate() const {
    auto bad = [](const std::string& what) { fail(ErrorCode::ConfigError, what); };
    if (!(alpha > 0.0 && alpha <= 1.0)) bad("alpha must lie in (0, 1]");
    if (!(beta > 0.0)) bad("beta must be positive");
    if (!(gamma > 1.0)) bad("Assumption U/S: gamma must exceed 1");
    if (!(gamma > beta / alpha)) bad("Assumption R: alpha > beta/gamma fails (gamma <= beta/alpha)");
    const double cap = std::min(1.0, alpha - beta / gamma);
    if (!(delta > 0.0 && delta < cap)) {
        bad("Assumption R: delta must satisfy 0 < delta < min{1, alpha - beta/gamma} = " + std::to_string(cap));
    }
    if (!(eps > 0.0 && eps < 1.0)) bad("eps must lie in (0, 1)");
    if (!(r0 > 0.0 && r0 < 1.0)) bad("r0 must lie in (0, 1)");
    if (!(c_u > 1.0) || !(c_s > 1.0)) bad("Assumption U/S: C^u and C^s must exceed 1");
    if (!(c_f >= 0.0)) bad("c_f must be nonnegative (0 = estimate from the system)");
    if (!(c_0 >= 0.0)) bad("c_0 must be nonnegative");
    if (!(rho > 0.0 && rho <= kRho)) bad("rho must lie in (0, 0.5]");
}

double ScaleParams::q_prefactor() const { return std::pow(eps, 2.0 / (alpha - delta)); }
double ScaleParams::q_max() const { return q_prefactor() * std::pow(r0, gamma); }

double eps_fn(const ScaleParams& s, double d_boundary) {
    if (!(d_boundary > 0.0)) fail(ErrorCode::NonpositiveBoundaryDistance, std::to_string(d_boundary));
    return s.eps * std::pow(std::min(s.r0, d_boundary), s.beta);
}

double q_fn(const ScaleParams& s, double d_boundary) {
    if (!(d_boundary > 0.0)) fail(ErrorCode::NonpositiveBoundaryDistance, std::to_string(d_boundary));
    const double q = s.q_prefactor() * std::pow(std::min(s.r0, d_boundary), s.gamma);
    if (d_boundary < 1.0) {
        const double dg = std::pow(d_boundary, s.gamma);
        if (!(q < dg && dg < d_boundary)) fail(ErrorCode::InvariantViolation, "Q(x) < d^gamma < d fails");
    }
    if (!(std::pow(q, s.alpha - s.delta) <= s.eps * eps_fn(s, d_boundary) * (1.0 + 1e-12))) {
        fail(ErrorCode::InvariantViolation, "Q^{alpha-delta} <= eps eps(x) fails");
    }
    return q;
}

double eps_at(const ScaleParams& s, const SystemSpec& sys, const Point& x) {
    return eps_fn(s, boundary_dist(x, sys.domain()));
}

double q_at(const ScaleParams& s, const SystemSpec& sys, const Point& x) {
    return q_fn(s, boundary_dist(x, sys.domain()));
}

double eps_eps_at(const ScaleParams& s, const SystemSpec& sys, const Point& x) { return s.eps * eps_at(s, sys, x); }

double estimate_c_f(const SystemSpec& sys, int resolution) {
    const std::size_t n = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
    std::vector<double> vals(n, 0.0);
    for_each_index(n, Execution::parallel, [&](std::size_t k) {
        const Point x((0.5 + static_cast<double>(k / resolution)) / resolution,
                      (0.5 + static_cast<double>(k % resolution)) / resolution);
        const Mat2 df = sys.jacobian(x);
        vals[k] = std::max(df.op_norm(), df.inverse().op_norm());
    });
    return 1.01 * *std::max_element(vals.begin(), vals.end());
}

ScaleParams with_c_f(ScaleParams s, const SystemSpec& sys) {
    if (s.c_f <= 0.0) s.c_f = estimate_c_f(sys);
    return s;
}

double delta_u_base(const ScaleParams& s, const SystemSpec& sys, const Point& x) {
    if (!(s.c_f > 0.0)) fail(ErrorCode::InvariantViolation, "c_f unset; call with_c_f first");
    const double d = boundary_dist(x, sys.domain());
    return 0.5 * std::min(s.eps * eps_fn(s, d), s.rho - std::sqrt(2.0) * s.c_f * q_fn(s, d));
}

double delta_u_fn(const ScaleParams& s, const SystemSpec& sys, const Point& x, int n_iters) {
    double du = delta_u_base(s, sys, x);
    if (!(du > 0.0)) fail(ErrorCode::CannotSatisfyEstimates, "nonpositive base value at " + to_string(x));
    const Splitting sx = compute_splitting(sys, x, n_iters);
    const Point fx = sys.forward(x);
    const Splitting sfx = compute_splitting(sys, fx, n_iters);
    constexpr double kPi = 3.14159265358979323846;
    for (int halvings = 0; halvings <= 20; ++halvings) {
        bool ok = block_estimates(LocalMapData(sys, s, x, fx, sx, sfx)).pass;
        for (int k = 0; ok && k < 4; ++k) {
            const double th = 0.5 * kPi * k;
            const Point y = exp_map(fx, TangentVector{0.99 * du * std::cos(th), 0.99 * du * std::sin(th)});
            if (boundary_dist_or_zero(y, sys.domain()) <= 0.0) {
                ok = false;
                break;
            }
            ok = block_estimates(LocalMapData(sys, s, x, y, sx, compute_splitting(sys, y, n_iters))).pass;
        }
        if (ok) return du;
        du *= 0.5;
    }
    fail(ErrorCode::CannotSatisfyEstimates, "20 halvings at " + to_string(x));
}

double delta_s_fn(const ScaleParams& s, const SystemSpec& sys, const Point& x, int n_iters) {
    return delta_u_fn(s, sys.inverse(), x, n_iters);
}

RateMarginReport check_rate_margins(const ScaleParams& s, const SystemSpec& sys, const std::vector<Point>& samples,
                                    double d_min, int n_iters, Execution exec) {
    RateMarginReport rep;
    rep.samples.resize(samples.size());
    std::vector<double> n_s(samples.size(), 0.0), m_u(samples.size(), 0.0);
    for_each_index(samples.size(), exec, [&](std::size_t i) {
        RateMarginSample& ls = rep.samples[i];
        ls.x = samples[i];
        ls.d_boundary = boundary_dist_or_zero(ls.x, sys.domain());
        if (ls.d_boundary < d_min) {
            ls.skipped = true;
            return;
        }
        ls.lhs = s.eps * eps_fn(s, ls.d_boundary);
        try {
            const Splitting sp = compute_splitting(sys, ls.x, n_iters);
            ls.min_side = std::min({sp.m_u - 1.0, sp.m_s_inv - 1.0, 1.0 - sp.n_s});
            n_s[i] = sp.n_s;
            m_u[i] = sp.m_u;
        } catch (const Error&) {
            ls.min_side = -std::numeric_limits<double>::infinity();
        }
        ls.slack = ls.min_side - ls.lhs;
    });

    double c0 = std::numeric_limits<double>::infinity();
    double thr = std::numeric_limits<double>::infinity();
    rep.a0 = rep.a1 = rep.a2 = rep.b = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rep.samples.size(); ++i) {
        const RateMarginSample& ls = rep.samples[i];
        if (ls.skipped) {
            ++rep.skipped;
            continue;
        }
        if (!(ls.slack > 0.0)) {
            ++rep.failures;
            rep.pass = false;
        }
        if (!rep.worst || ls.slack < rep.worst->slack) rep.worst = ls;
        const double e = eps_fn(s, ls.d_boundary);
        c0 = std::min(c0, ls.min_side / e);
        thr = std::min(thr, std::sqrt(std::max(0.0, ls.min_side) / (e / s.eps)));
        if (m_u[i] > 0.0) {
            rep.a0 = std::min(rep.a0, (std::sqrt(n_s[i]) - n_s[i]) / (1.0 - n_s[i]));
            rep.a1 = std::min(rep.a1, (m_u[i] - 1.0) / e);
            rep.a2 = std::min(rep.a2, (1.0 - n_s[i]) / e);
            rep.b = std::min(rep.b, m_u[i]);
        }
    }
    rep.c0_fit = std::isfinite(c0) ? c0 * (1.0 - 1e-9) : 0.0;
    rep.eps_threshold = thr;
    rep.smallness_applicable = !sys.domain().is_full();
    if (s.c_f > 0.0 && std::isfinite(rep.b)) rep.smallness_value = 1.0 / (std::pow(rep.b, s.beta) * s.c_f);
    return rep;
}

std::vector<EpsSweepStep> eps_threshold_sweep(const ScaleParams& s, const RateMarginReport& report, int bisections) {
    auto failures_at = [&](double eps) {
        int f = 0;
        for (const RateMarginSample& ls : report.samples) {
            if (ls.skipped) continue;
            const double lhs = eps * eps * std::pow(std::min(s.r0, ls.d_boundary), s.beta);
            if (!(lhs < ls.min_side)) ++f;
        }
        return f;
    };
    std::vector<EpsSweepStep> steps;
    double lo = 0.0, hi = s.eps;
    for (int k = 0; k < 64; ++k) {
        const int f = failures_at(hi);
        steps.push_back({hi, f});
        if (f > 0) break;
        lo = hi;
        hi *= 2.0;
    }
    if (steps.back().failures > 0) {
        for (int k = 0; k < bisections; ++k) {
            const double mid = 0.5 * (lo + hi);
            const int f = failures_at(mid);
            steps.push_back({mid, f});
            if (f > 0) hi = mid; else lo = mid;
        }
    }
    std::sort(steps.begin(), steps.end(), [](const EpsSweepStep& a, const EpsSweepStep& b) { return a.eps < b.eps; });
    return steps;
}

QComparabilityReport check_q_comparability(const ScaleParams& s, const SystemSpec& sys,
                                           const std::vector<std::pair<Point, Point>>& pairs) {
    QComparabilityReport rep;
    double worst_dev = 0.0;
    for (const auto& [x, y] : pairs) {
        const double qx = q_at(s, sys, x);
        if (torus_dist(x, y) > qx) {
            ++rep.excluded;
            continue;
        }
        ++rep.tested;
        const double ratio = q_at(s, sys, y) / qx;
        rep.min_ratio = std::min(rep.min_ratio, ratio);
        rep.max_ratio = std::max(rep.max_ratio, ratio);
        const double dev = std::abs(std::log(ratio));
        if (dev > worst_dev) {
            worst_dev = dev;
            rep.worst_pair = std::make_pair(x, y);
        }
        if (!(ratio >= 0.5 && ratio <= 2.0)) rep.pass = false;
    }
    const double e = 0.5 * (s.alpha - s.delta);
    rep.smallness_lower = s.eps < std::pow(1.0 - std::pow(2.0, -1.0 / s.gamma), e);
    rep.smallness_upper = s.eps < std::pow(std::pow(2.0, 1.0 / s.gamma) - 1.0, e);
    return rep;
}

}  // namespace pwh
