#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pwh/errors.hpp"
#include "pwh/perturbation.hpp"
#include "pwh/scales.hpp"
#include "pwh/splitting.hpp"
#include "pwh/systems.hpp"

using namespace pwh;

namespace {

double sine(const TangentVector& a, const TangentVector& b) {
    return std::abs(a.normalized().cross(b.normalized()));
}

}  // namespace

TEST_CASE("cat map splitting is the eigenbasis") {
    const SystemSpec cat = build_cat_map();
    const oracle::CatEigenpairs ep = oracle::cat_eigenpairs();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const Splitting s = compute_splitting(cat, {u(rng), u(rng)});
        CHECK(sine(s.e_u, {ep.e_u(0), ep.e_u(1)}) < 1e-12);
        CHECK(sine(s.e_s, {ep.e_s(0), ep.e_s(1)}) < 1e-12);
        CHECK(s.m_u == doctest::Approx(ep.lambda_u).epsilon(1e-12));
        CHECK(s.n_s == doctest::Approx(ep.lambda_s).epsilon(1e-12));
        CHECK(s.m_s_inv == doctest::Approx(ep.lambda_u).epsilon(1e-12));
        CHECK(s.n_u_inv == doctest::Approx(ep.lambda_s).epsilon(1e-12));
        CHECK(s.frame_det() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("inverse system exchanges stable and unstable directions") {
    const SystemSpec inv = build_cat_map().inverse();
    const Splitting s = compute_splitting(inv, {0.37, 0.81});
    CHECK(sine(s.e_u, cat_eigen().e_s) < 1e-12);
    CHECK(sine(s.e_s, cat_eigen().e_u) < 1e-12);
    CHECK(s.m_u == doctest::Approx(cat_eigen().lambda_u).epsilon(1e-12));
}

TEST_CASE("frame coordinates") {
    const Splitting s = compute_splitting(build_cat_map(), {0.1, 0.2});
    const TangentVector v{0.3, -0.7};
    const TangentVector c = s.to_frame(v);
    const TangentVector back = s.from_frame(c.a, c.b);
    CHECK(back.a == doctest::Approx(v.a).epsilon(1e-14));
    CHECK(back.b == doctest::Approx(v.b).epsilon(1e-14));
}

TEST_CASE("slowdown splitting is invariant and hyperbolic") {
    const SystemSpec slow = build_slowdown_map(0.15, 0.5);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-0.25, 0.25);
    for (int i = 0; i < 40; ++i) {
        const Point x{u(rng), u(rng)};
        if (boundary_dist_or_zero(x, slow.domain()) < 0.01) continue;
        const Splitting sx = compute_splitting(slow, x, 3000);
        const MapStep step = slow.forward_step(x);
        const Splitting sfx = compute_splitting(slow, step.image, 3000);
        CHECK(sine(step.jacobian * sx.e_u, sfx.e_u) < 1e-9);
        CHECK(sine(step.jacobian * sx.e_s, sfx.e_s) < 1e-9);
        CHECK(sx.m_u > 1.0);
        CHECK(sx.n_s < 1.0);
        // Rates are the norms of Df on the unit directions.
        CHECK(sx.m_u == doctest::Approx((step.jacobian * sx.e_u).norm()).epsilon(1e-14));
        CHECK(sx.m_u * sfx.n_u_inv == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("splitting reports non-convergence and boundary points") {
    const SystemSpec slow = build_slowdown_map(0.15, 0.5);
    CHECK_THROWS_AS(compute_splitting(slow, {0.0, 0.0}), Error);
    try {
        compute_splitting(slow, {0.002, 0.001}, 3);
        FAIL("expected NoConvergence");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoConvergence);
    }
}

TEST_CASE("cone apertures") {
    const Splitting s = compute_splitting(build_cat_map(), {0.5, 0.5});
    const ConeApertures k = cone_aperture(s, 0.045);
    const double lu = cat_eigen().lambda_u, ls = cat_eigen().lambda_s;
    CHECK(k.kappa_u == doctest::Approx(std::min(1.0, (lu - 0.045 - 1.0) / (ls + 0.045 + 1.0))).epsilon(1e-12));
    CHECK(k.kappa_s == doctest::Approx(k.kappa_u).epsilon(1e-12));
    CHECK_THROWS_AS(cone_aperture(s, 2.0), Error);
}

TEST_CASE("cones of the cat map for the map itself and a bump") {
    const SystemSpec cat = build_cat_map();
    const ScaleParams sc = with_c_f(ScaleParams{}, cat);
    const ConeFamily cones(cat, sc);
    for (const Point& x : {Point{0.1, 0.2}, Point{0.7, 0.3}}) {
        const ConeCheck c = cone_invariance_check(cat, cones, x);
        CHECK(c.pass);
        const GrowthCheck g = cone_growth_check(cat, cones, x);
        CHECK(g.pass);
        CHECK(g.factor_u >= std::sqrt(cat_eigen().lambda_u));
        const Splitting p = perturbed_splitting(cat, cones, x);
        CHECK(sine(p.e_u, cat_eigen().e_u) < 1e-12);
    }
    BumpParams b;
    b.amplitude = 3e-10;
    const SystemSpec g = make_bumped_system(cat, b);
    for (const Point& x : {Point{0.3, 0.6}, Point{0.33, 0.58}}) {
        CHECK(cone_invariance_check(g, cones, x).pass);
        CHECK(cone_growth_check(g, cones, x).pass);
        const Splitting p = perturbed_splitting(g, cones, x);
        CHECK(p.m_u > 1.0);
        CHECK(p.n_s < 1.0);
    }
}
