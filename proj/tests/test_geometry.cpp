#include <doctest.h>

#include <cmath>
#include <random>

#include "pwh/errors.hpp"
#include "pwh/geometry.hpp"

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

TEST_CASE("wrap keeps coordinates in the unit interval") {
    CHECK(wrap_unit(1.25) == doctest::Approx(0.25));
    CHECK(wrap_unit(-0.25) == doctest::Approx(0.75));
    CHECK(wrap_unit(1.0) == 0.0);
    CHECK(wrap_centered(0.75) == doctest::Approx(-0.25));
    const Point p{3.5, -2.1};
    CHECK(p.u == doctest::Approx(0.5));
    CHECK(p.v == doctest::Approx(0.9));
}

TEST_CASE("distance wraps around the torus") {
    CHECK(torus_dist({0.05, 0.5}, {0.95, 0.5}) == doctest::Approx(0.1));
    CHECK(torus_dist({0.0, 0.0}, {0.5, 0.5}) == doctest::Approx(std::sqrt(0.5)));
    const TangentVector d = displacement({0.95, 0.02}, {0.05, 0.98});
    CHECK(d.a == doctest::Approx(0.1));
    CHECK(d.b == doctest::Approx(-0.04));
}

TEST_CASE("exp and log are inverse inside the injectivity radius") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Point x{u(rng), u(rng)};
        const double r = 0.49 * u(rng), th = 6.283185307179586 * u(rng);
        const TangentVector w{r * std::cos(th), r * std::sin(th)};
        const TangentVector back = log_map(x, exp_map(x, w));
        CHECK(back.a == doctest::Approx(w.a).epsilon(1e-12));
        CHECK(back.b == doctest::Approx(w.b).epsilon(1e-12));
        CHECK(torus_dist(x, exp_map(x, w)) == doctest::Approx(r).epsilon(1e-12));
    }
}

TEST_CASE("metric properties on random triples") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Point a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
        CHECK(torus_dist(a, b) == torus_dist(b, a));
        CHECK(torus_dist(a, c) <= torus_dist(a, b) + torus_dist(b, c) + 1e-15);
        CHECK(torus_dist(a, b) <= std::sqrt(0.5) + 1e-15);
    }
}

TEST_CASE("exp and log reject vectors beyond the injectivity radius") {
    CHECK(code_of([] { exp_map({0.1, 0.1}, {0.5, 0.0}); }) == ErrorCode::NormExceedsInjectivityRadius);
    CHECK(code_of([] { log_map({0.0, 0.0}, {0.5, 0.5}); }) == ErrorCode::PointsTooFar);
}

TEST_CASE("boundary distance") {
    const DomainDescriptor full = DomainDescriptor::full();
    CHECK(boundary_dist({0.3, 0.3}, full) == 1.0);
    const DomainDescriptor punctured = DomainDescriptor::complement_of({Point{0.0, 0.0}});
    CHECK(boundary_dist({0.1, 0.0}, punctured) == doctest::Approx(0.1));
    CHECK(boundary_dist({0.9, 0.9}, punctured) == doctest::Approx(std::sqrt(0.02)));
    CHECK(code_of([&] { boundary_dist({0.0, 0.0}, punctured); }) == ErrorCode::PointOnBoundary);
    CHECK(boundary_dist_or_zero({0.0, 0.0}, punctured) == 0.0);
}

TEST_CASE("2x2 matrix helpers") {
    const Mat2 m{2.0, 1.0, 1.0, 1.0};
    CHECK(m.det() == 1.0);
    CHECK(m * m.inverse() == Mat2::identity());
    const double phi2 = (3.0 + std::sqrt(5.0)) / 2.0;
    CHECK(m.op_norm() == doctest::Approx(phi2).epsilon(1e-14));
    CHECK(m.min_norm() == doctest::Approx(1.0 / phi2).epsilon(1e-14));
}
