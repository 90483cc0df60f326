#include "pwh/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pwh/errors.hpp"
#include "pwh/splitting.hpp"

namespace pwh {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<Point> cell_centers(int n, const DomainDescriptor& domain) {
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Point p((i + 0.5) / n, (j + 0.5) / n);
            if (boundary_dist_or_zero(p, domain) > 0.0) pts.push_back(p);
        }
    return pts;
}

std::vector<Point> rings(int n, double inner, double outer, const DomainDescriptor& domain) {
    std::vector<Point> pts;
    if (domain.is_full()) return pts;
    const int n_r = std::max(2, n / 2);
    const int n_a = std::max(8, 2 * n);
    for (const Point& c : domain.excluded_points)
        for (int i = 0; i < n_r; ++i) {
            const double d = inner + (outer - inner) * i / (n_r - 1);
            for (int k = 0; k < n_a; ++k) {
                const double th = 2.0 * kPi * (k + 0.5) / n_a;
                pts.emplace_back(c.u + d * std::cos(th), c.v + d * std::sin(th));
            }
        }
    return pts;
}

struct RateSample {
    double d = 0.0;
    double rate_minus_one = 0.0;
    double ratio = 0.0;
    bool ok = false;
};

RateWitness fit_rates(const std::vector<Point>& pts, const std::vector<RateSample>& rs, double c_conf, double beta,
                      double gamma) {
    RateWitness w;
    w.beta = beta;
    w.gamma = gamma;
    w.vacuous = pts.empty();
    w.c_fit = std::numeric_limits<double>::infinity();
    w.worst_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ++w.tested;
        const RateSample& r = rs[i];
        if (!r.ok) {
            w.pass = false;
            w.worst_point = pts[i];
            w.worst_slack = -std::numeric_limits<double>::infinity();
            w.c_fit = 0.0;
            continue;
        }
        const double m = std::max(std::pow(r.d, beta), std::pow(r.ratio, gamma) - 1.0);
        w.c_fit = std::min(w.c_fit, r.rate_minus_one / m);
        const double slack = r.rate_minus_one - c_conf * m;
        if (slack < w.worst_slack) {
            w.worst_slack = slack;
            w.worst_point = pts[i];
        }
    }
    if (w.vacuous) {
        w.c_fit = 0.0;
        w.worst_slack = 0.0;
        return w;
    }
    w.pass = w.pass && w.worst_slack >= 0.0 && w.c_fit > 1.0;
    return w;
}

}  // namespace

AssumptionReport verify_assumptions(const SystemSpec& sys, const ScaleParams& scales, const AssumptionOptions& opts) {
    AssumptionReport rep;
    rep.r_margin = scales.alpha - scales.beta / scales.gamma - scales.delta;
    rep.r_pass = rep.r_margin > 0.0 && scales.gamma > 1.0;

    const std::vector<Point> grid = cell_centers(opts.resolution, sys.domain());
    const int K = opts.window;
    rep.u1.resize(grid.size());
    rep.s1.resize(grid.size());
    std::vector<double> kslack(grid.size(), std::numeric_limits<double>::infinity());
    std::vector<double> holder(grid.size(), 0.0);

    for_each_index(grid.size(), opts.exec, [&](std::size_t i) {
        const Point x = grid[i];
        ProductSample& u = rep.u1[i];
        ProductSample& s = rep.s1[i];
        u.x = s.x = x;
        try {
            double pu_f = 1.0, pu_b = 1.0, ps_f = 1.0, ps_b = 1.0;
            Point yf = x, yb = x;
            Splitting sx{}, sfx{};
            for (int k = 0; k < K; ++k) {
                const Splitting a = compute_splitting(sys, yf, opts.n_iters);
                if (k == 0) sx = a;
                if (k == 1) sfx = a;
                pu_f *= a.m_u;
                ps_f *= a.m_s_inv;
                yf = sys.forward(yf);
                const Splitting b = k == 0 ? a : compute_splitting(sys, yb, opts.n_iters);
                pu_b *= b.m_u;
                ps_b *= b.m_s_inv;
                yb = sys.backward(yb);
            }
            u.forward = pu_f;
            u.backward = pu_b;
            s.forward = ps_f;
            s.backward = ps_b;
            u.pass = pu_f > opts.pi_min && pu_b > opts.pi_min;
            s.pass = ps_f > opts.pi_min && ps_b > opts.pi_min;

            const Point fx = sys.forward(x);
            if (K < 2) sfx = compute_splitting(sys, fx, opts.n_iters);
            const double ex = eps_eps_at(scales, sys, x);
            const double efx = eps_eps_at(scales, sys, fx);
            const double lhs = sx.n_s / sx.m_u;
            const double rhs = (sx.n_s + ex + 1.0) / (sfx.n_s + efx + 1.0) * (sfx.m_u - efx - 1.0) / (sx.m_u - ex - 1.0);
            kslack[i] = rhs - lhs;

            const Mat2 dfx = sys.jacobian(x);
            for (double h : {1e-2, 1e-3}) {
                for (const TangentVector& dir : {TangentVector{1.0, 0.0}, TangentVector{0.0, 1.0}}) {
                    const Point y = exp_map(x, h * dir);
                    if (boundary_dist_or_zero(y, sys.domain()) <= 0.0) continue;
                    holder[i] = std::max(holder[i], (sys.jacobian(y) - dfx).op_norm() / std::pow(h, scales.alpha));
                }
            }
        } catch (const Error&) {
            u.pass = s.pass = false;
            kslack[i] = -std::numeric_limits<double>::infinity();
        }
    });

    rep.k_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!rep.u1[i].pass || !rep.s1[i].pass) rep.counterexamples.push_back(grid[i]);
        rep.u1_pass = rep.u1_pass && rep.u1[i].pass;
        rep.s1_pass = rep.s1_pass && rep.s1[i].pass;
        if (kslack[i] < rep.k_slack) {
            rep.k_slack = kslack[i];
            rep.k_worst = grid[i];
        }
        rep.holder_fit = std::max(rep.holder_fit, holder[i]);
    }
    rep.k_pass = grid.empty() || rep.k_slack > 0.0;
    if (!rep.k_pass && rep.k_worst) rep.counterexamples.push_back(*rep.k_worst);

    const std::vector<Point> near = rings(opts.resolution, opts.inner_fraction * scales.r0, scales.r0, sys.domain());
    std::vector<RateSample> ru(near.size()), rs(near.size());
    for_each_index(near.size(), opts.exec, [&](std::size_t i) {
        const Point x = near[i];
        try {
            const Splitting sp = compute_splitting(sys, x, opts.n_iters);
            const double d = boundary_dist(x, sys.domain());
            ru[i] = {d, sp.m_u - 1.0, boundary_dist(sys.forward(x), sys.domain()) / d, true};
            rs[i] = {d, sp.m_s_inv - 1.0, boundary_dist(sys.backward(x), sys.domain()) / d, true};
        } catch (const Error&) {
        }
    });
    rep.u2 = fit_rates(near, ru, scales.c_u, scales.beta, scales.gamma);
    rep.s2 = fit_rates(near, rs, scales.c_s, scales.beta, scales.gamma);
    if (!rep.u2.pass && rep.u2.worst_point) rep.counterexamples.push_back(*rep.u2.worst_point);
    if (!rep.s2.pass && rep.s2.worst_point) rep.counterexamples.push_back(*rep.s2.worst_point);
    return rep;
}

}  // namespace pwh
