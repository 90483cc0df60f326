#include <doctest.h>

#include <cmath>

#include "pwh/errors.hpp"
#include "pwh/perturbation.hpp"
#include "pwh/scales.hpp"
#include "pwh/systems.hpp"

using namespace pwh;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvariantViolation;
}

}  // namespace

TEST_CASE("bump profile values and gradient") {
    BumpParams bump;
    bump.center = {0.3, 0.6};
    bump.radius = 0.1;
    CHECK(bump_profile(bump, bump.center).value == doctest::Approx(1.0));
    CHECK(bump_profile(bump, bump.center).gradient.norm() == doctest::Approx(0.0));
    CHECK(bump_profile(bump, {0.41, 0.6}).value == 0.0);
    CHECK(bump_profile(bump, {0.3, 0.7}).value == 0.0);
    // b(1/2) = exp(1 - 4/3).
    CHECK(bump_profile(bump, {0.35, 0.6}).value == doctest::Approx(std::exp(-1.0 / 3.0)).epsilon(1e-12));
    const double h = 1e-6;
    for (const Point x : {Point{0.33, 0.62}, Point{0.25, 0.55}, Point{0.38, 0.6}}) {
        const BumpValue b = bump_profile(bump, x);
        const double du = (bump_profile(bump, {x.u + h, x.v}).value - bump_profile(bump, {x.u - h, x.v}).value) / (2 * h);
        const double dv = (bump_profile(bump, {x.u, x.v + h}).value - bump_profile(bump, {x.u, x.v - h}).value) / (2 * h);
        CHECK(b.gradient.a == doctest::Approx(du).epsilon(1e-6));
        CHECK(b.gradient.b == doctest::Approx(dv).epsilon(1e-6));
    }
}

TEST_CASE("bumped map agrees with f off the support and has the right derivative") {
    const SystemSpec f = build_cat_map();
    BumpParams bump;
    bump.amplitude = 1e-4;
    bump.direction_angle = 0.7;
    const SystemSpec g = make_bumped_system(f, bump);
    CHECK(g.forward({0.7, 0.1}) == f.forward({0.7, 0.1}));
    const Point x{0.32, 0.57};
    const Point gx = g.forward(x);
    CHECK(torus_dist(gx, f.forward(x)) ==
          doctest::Approx(1e-4 * bump_profile(bump, x).value).epsilon(1e-9));
    CHECK(torus_dist(g.backward(gx), x) < 1e-13);
    const double h = 1e-6;
    const TangentVector cu = displacement(g.forward({x.u - h, x.v}), g.forward({x.u + h, x.v}));
    const TangentVector cv = displacement(g.forward({x.u, x.v - h}), g.forward({x.u, x.v + h}));
    const Mat2 J = g.jacobian(x);
    CHECK(J.a11 == doctest::Approx(cu.a / (2 * h)).epsilon(1e-7));
    CHECK(J.a21 == doctest::Approx(cu.b / (2 * h)).epsilon(1e-7));
    CHECK(J.a12 == doctest::Approx(cv.a / (2 * h)).epsilon(1e-7));
    CHECK(J.a22 == doctest::Approx(cv.b / (2 * h)).epsilon(1e-7));
    const Mat2 I = g.backward_step(gx).jacobian * J;
    CHECK(std::abs(I.a11 - 1.0) + std::abs(I.a12) + std::abs(I.a21) + std::abs(I.a22 - 1.0) < 1e-10);
}

TEST_CASE("perturbation budget") {
    const SystemSpec f = build_cat_map();
    const ScaleParams sc = with_c_f(ScaleParams{}, f);
    BumpParams bump;
    PerturbationOptions opts;
    opts.grid = 32;
    const double a_max = max_bump_amplitude(f, sc, bump, opts);
    CHECK(a_max > 0.0);
    bump.amplitude = 0.5 * a_max;
    const auto [g, budget] = build_perturbation(f, sc, bump, opts);
    CHECK(budget.worst_ratio <= 0.5 + 1e-9);
    CHECK(budget.worst_ratio > 0.4);
    CHECK(g.perturbation_support().has_value());
    bump.amplitude = 1.5 * a_max;
    CHECK(code_of([&] { build_perturbation(f, sc, bump, opts); }) == ErrorCode::BudgetExceeded);
    bump.amplitude = 0.0;
    const auto [g0, b0] = build_perturbation(f, sc, bump, opts);
    CHECK(b0.worst_ratio == 0.0);
    CHECK(g0.forward({0.3, 0.6}) == f.forward({0.3, 0.6}));
}

TEST_CASE("bump support must stay away from excluded points") {
    const SystemSpec slow = build_slowdown_map(0.15, 0.5);
    ScaleParams s0;
    s0.r0 = 0.1;
    const ScaleParams sc = with_c_f(s0, slow);
    BumpParams bump;
    bump.center = {0.12, 0.05};
    bump.amplitude = 1e-9;
    CHECK(code_of([&] { build_perturbation(slow, sc, bump); }) == ErrorCode::SupportTouchesBoundary);
}
