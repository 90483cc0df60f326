#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pwh/errors.hpp"
#include "pwh/systems.hpp"

using namespace pwh;

namespace {

Mat2 finite_difference_jacobian(const SystemSpec& sys, const Point& x, double h) {
    Mat2 j;
    for (int c = 0; c < 2; ++c) {
        const TangentVector e = c == 0 ? TangentVector{h, 0.0} : TangentVector{0.0, h};
        const TangentVector d = displacement(sys.forward(exp_map(x, -e)), sys.forward(exp_map(x, e)));
        (c == 0 ? j.a11 : j.a12) = d.a / (2.0 * h);
        (c == 0 ? j.a21 : j.a22) = d.b / (2.0 * h);
    }
    return j;
}

}  // namespace

TEST_CASE("cat map eigen-data agree with a symmetric eigensolver") {
    const CatEigen& ce = cat_eigen();
    const oracle::CatEigenpairs ep = oracle::cat_eigenpairs();
    CHECK(ce.lambda_u == doctest::Approx(ep.lambda_u).epsilon(1e-15));
    CHECK(ce.lambda_s == doctest::Approx(ep.lambda_s).epsilon(1e-15));
    CHECK(std::abs(ce.e_u.a * ep.e_u(1) - ce.e_u.b * ep.e_u(0)) < 1e-15);
    CHECK(std::abs(ce.e_s.a * ep.e_s(1) - ce.e_s.b * ep.e_s(0)) < 1e-15);
    CHECK(ce.lambda_u == doctest::Approx(2.618034).epsilon(1e-6));
    CHECK(ce.e_u.a == doctest::Approx(0.850651).epsilon(1e-6));
    CHECK(ce.e_u.b == doctest::Approx(0.525731).epsilon(1e-6));
    // Symmetric matrix: the frame is orthonormal.
    CHECK(std::abs(ce.e_u.cross(ce.e_s)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cat map values and inverse") {
    const SystemSpec cat = build_cat_map();
    const Point y = cat.forward({0.3, 0.4});
    CHECK(y.u == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(y.v == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(cat.jacobian({0.1, 0.2}) == Mat2{2.0, 1.0, 1.0, 1.0});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Point x{u(rng), u(rng)};
        CHECK(torus_dist(cat.backward(cat.forward(x)), x) < 1e-15);
        const MapStep fwd = cat.forward_step(x);
        const MapStep bwd = cat.backward_step(fwd.image);
        CHECK(bwd.jacobian * fwd.jacobian == Mat2::identity());
    }
    CHECK(cat.domain().is_full());
}

TEST_CASE("inverse system swaps the directions") {
    const SystemSpec cat = build_cat_map();
    const SystemSpec inv = cat.inverse();
    const Point x{0.21, 0.67};
    CHECK(inv.forward(x) == cat.backward(x));
    CHECK(inv.jacobian(x) == cat.jacobian_inv(x));
}

TEST_CASE("slowdown profile") {
    const SlowProfile p{0.15, 0.5};
    const double r2 = 0.15 * 0.15;
    CHECK(p.value(r2) == 1.0);
    CHECK(p.value(2.0 * r2) == 1.0);
    // Pure power law t^{beta/2} below the blend.
    const double t = 0.25;
    CHECK(p.value(t * r2) == doctest::Approx(std::pow(t, 0.25)).epsilon(1e-14));
    for (double s : {0.1 * r2, 0.5 * r2, 0.92 * r2, 0.97 * r2}) {
        const double h = 1e-7 * r2;
        const double fd = (p.value(s + h) - p.value(s - h)) / (2.0 * h);
        CHECK(p.derivative(s) == doctest::Approx(fd).epsilon(1e-6));
    }
    // Continuity of value and derivative across the blend boundaries.
    for (double edge : {0.9 * r2, r2}) {
        CHECK(p.value(edge * (1 - 1e-12)) == doctest::Approx(p.value(edge * (1 + 1e-12))).epsilon(1e-9));
        CHECK(p.derivative(edge * (1 - 1e-12)) == doctest::Approx(p.derivative(edge * (1 + 1e-12))).epsilon(1e-6));
    }
}

TEST_CASE("slowdown map") {
    const SystemSpec slow = build_slowdown_map(0.15, 0.5);
    const SystemSpec cat = build_cat_map();
    REQUIRE(slow.domain().excluded_points.size() == 1);
    CHECK(slow.domain().excluded_points[0] == Point{0.0, 0.0});

    SUBCASE("far from the fixed point it is the cat map") {
        // Points whose straight-line flow stays outside the disk.
        const CatEigen& ce = cat_eigen();
        for (double c : {0.3, -0.3}) {
            const Point x = exp_map(Point{0.0, 0.0}, c * ce.e_u + 0.3 * ce.e_s);
            CHECK(slow.forward(x) == cat.forward(x));
        }
        CHECK(slow.forward({0.5, 0.5}) == cat.forward({0.5, 0.5}));
    }

    SUBCASE("forward and backward are inverse") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(-0.2, 0.2);
        for (int i = 0; i < 100; ++i) {
            const Point x{u(rng), u(rng)};
            if (boundary_dist_or_zero(x, slow.domain()) < 1e-3) continue;
            CHECK(torus_dist(slow.backward(slow.forward(x)), x) < 1e-9);
            const MapStep fwd = slow.forward_step(x);
            const Mat2 prod = slow.backward_step(fwd.image).jacobian * fwd.jacobian;
            CHECK((prod - Mat2::identity()).max_abs_entry() < 1e-6);
        }
    }

    SUBCASE("Jacobian matches finite differences") {
        for (const Point& x : {Point{0.05, 0.02}, Point{0.97, 0.08}, Point{0.1, 0.9}, Point{0.01, 0.005}}) {
            const Mat2 fd = finite_difference_jacobian(slow, x, 1e-6);
            CHECK((slow.jacobian(x) - fd).max_abs_entry() < 1e-5);
        }
    }

    SUBCASE("fixed point and its excluded neighbourhood") {
        CHECK(torus_dist(slow.forward({1e-4, 0.0}), {0.0, 0.0}) < 1e-3);
        CHECK_THROWS_AS(build_slowdown_map(0.2, 0.5), Error);
        CHECK_THROWS_AS(build_slowdown_map(0.1, 0.0), Error);
        CHECK(max_slow_radius() == doctest::Approx(0.190983).epsilon(1e-5));
    }
}

TEST_CASE("slowdown expansion along the unstable axis") {
    // On the axis the Jacobian is diagonal in the eigenframe, so e_u is invariant and
    // m(Df|E^u) = |Df e_u|. Power iteration cannot resolve E^u there: the backward orbit
    // creeps into the fixed point, where both rates tend to 1.
    const SystemSpec slow = build_slowdown_map(0.15, 0.5);
    const CatEigen& ce = cat_eigen();
    auto rate = [&](double r) { return (slow.jacobian(exp_map({0.0, 0.0}, r * ce.e_u)) * ce.e_u).norm(); };
    // Rising up to the overshoot peak near d = 0.068, then falling back to lambda_u.
    double prev = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double r = 0.065 * k / 100.0;
        const TangentVector img = slow.jacobian(exp_map({0.0, 0.0}, r * ce.e_u)) * ce.e_u;
        CHECK(std::abs(img.normalized().cross(ce.e_u)) < 1e-9);
        const double m_u = img.norm();
        CHECK(m_u >= prev - 1e-9);
        CHECK(m_u > 1.0);
        if (r <= 0.15 / 4.0) CHECK(m_u < ce.lambda_u);
        prev = m_u;
    }
    CHECK(rate(0.075) > ce.lambda_u);
    for (int k = 0; k < 20; ++k) CHECK(rate(0.07 + 0.004 * k) >= rate(0.07 + 0.004 * (k + 1)) - 1e-9);
    const double far = (slow.jacobian(exp_map({0.0, 0.0}, 0.4 * ce.e_u)) * ce.e_u).norm();
    CHECK(far == doctest::Approx(ce.lambda_u).epsilon(1e-12));
}
