#include "pwh/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pwh/errors.hpp"

namespace pwh {

BumpValue bump_profile(const BumpParams& bump, const Point& x) {
    const TangentVector o = displacement(bump.center, x);
    const double r = o.norm();
    const double t = r / bump.radius;
    if (!(t < 1.0)) return {};
    const double q = 1.0 - t * t;
    const double b = std::exp(1.0 - 1.0 / q);
    BumpValue out;
    out.value = b;
    if (r > 0.0) {
        const double db_dt = b * (-2.0 * t / (q * q));
        out.gradient = (db_dt / (bump.radius * r)) * o;
    }
    return out;
}

namespace {

class BumpModel final : public SystemModel {
public:
    BumpModel(SystemSpec f, BumpParams bump)
        : f_(std::move(f)), bump_(bump), dir_{std::cos(bump.direction_angle), std::sin(bump.direction_angle)} {}

    Point forward(const Point& x) const override {
        const BumpValue b = bump_profile(bump_, x);
        if (b.value == 0.0 || bump_.amplitude == 0.0) return f_.forward(x);
        const Point fx = f_.forward(x);
        return Point(fx.u + bump_.amplitude * b.value * dir_.a, fx.v + bump_.amplitude * b.value * dir_.b);
    }

    MapStep forward_step(const Point& x) const override {
        const BumpValue b = bump_profile(bump_, x);
        if (b.value == 0.0 || bump_.amplitude == 0.0) return f_.forward_step(x);
        MapStep s = f_.forward_step(x);
        const double a = bump_.amplitude;
        s.image = Point(s.image.u + a * b.value * dir_.a, s.image.v + a * b.value * dir_.b);
        s.jacobian = s.jacobian + Mat2{a * dir_.a * b.gradient.a, a * dir_.a * b.gradient.b,
                                       a * dir_.b * b.gradient.a, a * dir_.b * b.gradient.b};
        return s;
    }

    // Solve x = f^{-1}(y - eta(x)) by fixed-point iteration; |D eta| is tiny so this contracts fast.
    Point backward(const Point& y) const override {
        Point x = f_.backward(y);
        if (bump_.amplitude == 0.0) return x;
        for (int it = 0; it < 100; ++it) {
            const BumpValue b = bump_profile(bump_, x);
            const double k = bump_.amplitude * b.value;
            const Point next = f_.backward(Point(y.u - k * dir_.a, y.v - k * dir_.b));
            if (next == x) return x;
            if (torus_dist(next, x) < 1e-17) return next;
            x = next;
        }
        fail(ErrorCode::NoConvergence, "inverse of perturbed map at " + to_string(y));
    }

    MapStep backward_step(const Point& y) const override {
        const Point x = backward(y);
        return {x, forward_step(x).jacobian.inverse()};
    }

    std::optional<BumpSupport> support() const override {
        if (bump_.amplitude == 0.0) return std::nullopt;
        return BumpSupport{bump_.center, bump_.radius};
    }

private:
    SystemSpec f_;
    BumpParams bump_;
    TangentVector dir_;
};

void check_support(const SystemSpec& f, const ScaleParams& scales, const BumpParams& bump) {
    if (!(bump.radius > 0.0 && bump.radius < 0.5)) fail(ErrorCode::ConfigError, "bump radius must lie in (0, 0.5)");
    for (const Point& p : f.domain().excluded_points) {
        if (torus_dist(p, bump.center) < bump.radius + scales.r0) {
            fail(ErrorCode::SupportTouchesBoundary, "bump support meets the r0-neighbourhood of " + to_string(p));
        }
    }
}

std::vector<Point> grid_points(int n) {
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) pts.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);
    return pts;
}

double budget_bound(const SystemSpec& f, const ScaleParams& scales, const Point& x, double xi0, int n_iters) {
    const double q = q_at(scales, f, x);
    return xi0 * delta_u_fn(scales, f, x, n_iters) * q * q * q_at(scales, f, f.forward(x));
}

}  // namespace

SystemSpec make_bumped_system(const SystemSpec& f, const BumpParams& bump) {
    return SystemSpec(std::make_shared<BumpModel>(f, bump), f.domain(), f.holder_alpha(), f.name() + "+bump");
}

std::pair<SystemSpec, PerturbationBudget> build_perturbation(const SystemSpec& f, const ScaleParams& scales,
                                                             const BumpParams& bump,
                                                             const PerturbationOptions& opts) {
    check_support(f, scales, bump);
    const SystemSpec g = make_bumped_system(f, bump);
    PerturbationBudget budget;
    budget.xi0 = opts.xi0;
    budget.grid = opts.grid;
    const std::vector<Point> pts = grid_points(opts.grid);
    budget.samples.resize(pts.size());
    for_each_index(pts.size(), opts.exec, [&](std::size_t i) {
        BudgetSample& bs = budget.samples[i];
        bs.x = pts[i];
        if (boundary_dist_or_zero(bs.x, f.domain()) <= 0.0) return;
        const MapStep sf = f.forward_step(bs.x);
        const MapStep sg = g.forward_step(bs.x);
        bs.c0_gap = torus_dist(sf.image, sg.image);
        bs.c1_gap = (sf.jacobian - sg.jacobian).op_norm();
        if (bs.c0_gap > 0.0 || bs.c1_gap > 0.0) bs.bound = budget_bound(f, scales, bs.x, opts.xi0, opts.n_iters);
    });
    for (const BudgetSample& bs : budget.samples) {
        if (bs.bound <= 0.0) continue;
        const double ratio = std::max(bs.c0_gap, bs.c1_gap) / bs.bound;
        if (ratio > budget.worst_ratio) {
            budget.worst_ratio = ratio;
            budget.worst_point = bs.x;
        }
    }
    if (!(budget.worst_ratio < 1.0)) {
        fail(ErrorCode::BudgetExceeded, "gap/budget = " + std::to_string(budget.worst_ratio) + " at " +
                                            to_string(*budget.worst_point));
    }
    return {g, budget};
}

double max_bump_amplitude(const SystemSpec& f, const ScaleParams& scales, BumpParams bump,
                          const PerturbationOptions& opts) {
    check_support(f, scales, bump);
    const std::vector<Point> pts = grid_points(opts.grid);
    std::vector<double> cap(pts.size(), std::numeric_limits<double>::infinity());
    for_each_index(pts.size(), opts.exec, [&](std::size_t i) {
        const BumpValue b = bump_profile(bump, pts[i]);
        const double unit_gap = std::max(b.value, b.gradient.norm());
        if (unit_gap <= 0.0 || boundary_dist_or_zero(pts[i], f.domain()) <= 0.0) return;
        cap[i] = budget_bound(f, scales, pts[i], opts.xi0, opts.n_iters) / unit_gap;
    });
    return *std::min_element(cap.begin(), cap.end());
}

}  // namespace pwh
