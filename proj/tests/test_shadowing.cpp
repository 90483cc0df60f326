#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pwh/errors.hpp"
#include "pwh/scales.hpp"
#include "pwh/shadowing.hpp"
#include "pwh/systems.hpp"

using namespace pwh;

namespace {

struct Cat {
    SystemSpec sys = build_cat_map();
    ScaleParams sc = with_c_f(ScaleParams{}, sys);
};

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

TEST_CASE("noisy orbits respect both step bounds") {
    const Cat c;
    for (double kick : {0.01, 0.5, 0.99}) {
        const PseudoOrbit po = make_noisy_orbit(c.sys, c.sc, {0.2, 0.7}, 20, kick, 42);
        CHECK(po.points.size() == 41);
        CHECK(po.valid());
        const ValidationReport v = validate_pseudo_orbit(c.sys, c.sc, po);
        CHECK(v.pass);
        CHECK_FALSE(v.first_failing_step.has_value());
        for (std::size_t i = 0; i < po.steps.size(); ++i) {
            CHECK(v.steps[i].forward_gap == po.steps[i].forward_gap);
            CHECK(po.steps[i].forward_gap <= kick * po.steps[i].forward_bound);
        }
        CHECK(po.stable_product < 1e-6);
        CHECK(po.unstable_inv_product < 1e-6);
    }
    // Relaxed bounds are the larger ones.
    OrbitOptions relaxed;
    relaxed.mode = GapMode::relaxed;
    const PseudoOrbit a = make_noisy_orbit(c.sys, c.sc, {0.2, 0.7}, 5, 0.5, 1);
    const PseudoOrbit b = make_noisy_orbit(c.sys, c.sc, {0.2, 0.7}, 5, 0.5, 1, relaxed);
    CHECK(b.steps[0].forward_bound == doctest::Approx(0.0225));
    CHECK(a.steps[0].forward_bound < b.steps[0].forward_bound);
}

TEST_CASE("kicks beyond the bound make an invalid orbit") {
    const Cat c;
    const PseudoOrbit po = make_noisy_orbit(c.sys, c.sc, {0.2, 0.7}, 10, 2.0, 3);
    CHECK_FALSE(po.steps_ok());
    const ValidationReport v = validate_pseudo_orbit(c.sys, c.sc, po);
    CHECK_FALSE(v.pass);
    REQUIRE(v.first_failing_step.has_value());
    CHECK(*v.first_failing_step == -10);
}

TEST_CASE("zero noise gives the true orbit and the identity shadow") {
    const Cat c;
    const PseudoOrbit po = make_noisy_orbit(c.sys, c.sc, {0.123, 0.456}, 30, 0.0, 5);
    for (int n = -30; n < 30; ++n) CHECK(torus_dist(c.sys.forward(po.at(n)), po.at(n + 1)) < 1e-12);
    const ShadowCertificate cert = shadow_point(c.sys, c.sc, po);
    CHECK(cert.pass);
    CHECK(cert.distance_to_x0 < 1e-12);
    const PseudoOrbit from_points = pseudo_orbit_from_points(c.sys, c.sc, po.points);
    CHECK(from_points.valid());
    CHECK(from_points.at(0) == po.at(0));
}

TEST_CASE("shadow certificate on noisy cat orbits") {
    const Cat c;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const PseudoOrbit po = make_noisy_orbit(c.sys, c.sc, {0.61, 0.14}, 40, 0.5, seed);
        const ShadowCertificate cert = shadow_point(c.sys, c.sc, po);
        CHECK(cert.pass);
        CHECK(cert.distance_to_x0 <= cert.q_x0 / 50.0);
        CHECK(cert.q_x0 == doctest::Approx(c.sc.q_max()));
        CHECK(cert.containment_horizon == 40);
        CHECK(cert.orbit_residual < 1e-10);
        CHECK(cert.max_box_ratio <= 1.0);
        CHECK(cert.orbit.size() == 81);
        CHECK(cert.orbit[40] == cert.shadow);
    }
}

TEST_CASE("shadow matches the banded linear solve on the cat map") {
    const Cat c;
    for (std::uint64_t seed = 11; seed <= 15; ++seed) {
        const PseudoOrbit po = make_noisy_orbit(c.sys, c.sc, {0.33, 0.9}, 50, 0.3, seed);
        const Point oracle_shadow = oracle::sparse_linear_shadow(po);
        const LinearShadow lin = linearized_shadow(c.sys, c.sc, po);
        const ShadowCertificate cert = shadow_point(c.sys, c.sc, po);
        CHECK(torus_dist(lin.shadow, oracle_shadow) < 1e-12);
        CHECK(torus_dist(cert.shadow, oracle_shadow) < 1e-12);
        CHECK(lin.offsets.size() == 101);
        CHECK(lin.sweeps <= 5);
    }
}

TEST_CASE("local manifolds forget their seeds") {
    const Cat c;
    const PseudoOrbit po = make_noisy_orbit(c.sys, c.sc, {0.41, 0.52}, 40, 0.2, 9);
    const ManifoldLimit wu = local_unstable_manifold(c.sys, c.sc, po);
    CHECK(wu.increment < 1e-11);
    CHECK(admissibility_check(wu.manifold, c.sc).pass);
    const ManifoldSeed tilted = [](const Point& base, ManifoldKind kind, double radius, const Splitting& frame) {
        return AdmissibleManifold::from_function(base, kind, radius, frame,
                                                 [&](double v) { return 2e-4 * radius + 0.2 * v; });
    };
    const ManifoldLimit a = manifold_at_depth(c.sys, c.sc, po, ManifoldKind::unstable, 30);
    const ManifoldLimit b = manifold_at_depth(c.sys, c.sc, po, ManifoldKind::unstable, 30, tilted);
    double diff = 0.0;
    for (int i = 0; i < a.manifold.size(); ++i)
        diff = std::max(diff, std::abs(a.manifold.phi[static_cast<std::size_t>(i)] - b.manifold.phi[static_cast<std::size_t>(i)]));
    CHECK(diff < 1e-12);
    const ManifoldLimit ws = local_stable_manifold(c.sys, c.sc, po);
    CHECK(ws.increment < 1e-11);
    CHECK(ws.manifold.kind == ManifoldKind::stable);
}

TEST_CASE("sub-windows reuse the orbit") {
    const Cat c;
    const PseudoOrbit po = make_noisy_orbit(c.sys, c.sc, {0.7, 0.2}, 30, 0.4, 21);
    const PseudoOrbit w = sub_window(po, 3, 20);
    CHECK(w.K == 20);
    for (int n = -20; n <= 20; ++n) CHECK(w.at(n) == po.at(n + 3));
    CHECK(w.valid());
    CHECK_THROWS_AS(sub_window(po, 15, 20), Error);
}

TEST_CASE("expansivity on the cat map") {
    const Cat c;
    const Point x{0.25, 0.4};
    CHECK_FALSE(expansivity_test(c.sys, c.sc, x, x, 10).separated);
    const ExpansivityVerdict v = expansivity_test(c.sys, c.sc, x, exp_map(x, {1e-3, 0.0}), 6);
    CHECK(v.separated);
    CHECK(std::abs(v.n) <= 6);
    CHECK(v.distance > v.radius);
    // Along the stable direction only backward iterates separate.
    const ExpansivityVerdict s = expansivity_test(c.sys, c.sc, x, exp_map(x, 1e-3 * cat_eigen().e_s), 6);
    CHECK(s.separated);
    CHECK(s.n < 0);
}

TEST_CASE("batch certification is identical serially and in parallel") {
    const Cat c;
    std::vector<ShadowJob> jobs;
    for (int i = 0; i < 8; ++i) jobs.push_back({Point{0.1 * i + 0.05, 0.37}, 30, 0.1 * (i % 4), 100u + i});
    const auto serial = certify_batch(c.sys, c.sc, jobs, {}, {}, Execution::serial);
    const auto parallel = certify_batch(c.sys, c.sc, jobs, {}, {}, Execution::parallel);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].ok);
        REQUIRE(serial[i].certificate.has_value());
        REQUIRE(parallel[i].certificate.has_value());
        CHECK(serial[i].certificate->shadow == parallel[i].certificate->shadow);
        CHECK(serial[i].certificate->distance_to_x0 == parallel[i].certificate->distance_to_x0);
    }
}

TEST_CASE("slowdown orbits") {
    const SystemSpec slow = build_slowdown_map(0.15, 0.5);
    ScaleParams s0;
    s0.r0 = 0.1;
    const ScaleParams sc = with_c_f(s0, slow);
    OrbitOptions opts;
    opts.n_iters = 3000;
    CHECK(code_of([&] { make_noisy_orbit(slow, sc, {0.3, 0.2}, 10, 0.1, 1, opts); }) ==
          ErrorCode::CannotSatisfyEstimates);
    CHECK(code_of([&] { make_noisy_orbit(slow, sc, {1e-4, 0.0}, 10, 0.1, 1, opts); }) ==
          ErrorCode::OrbitLeavesDomain);
    // With the unrefined delta^u the construction goes through.
    opts.refine_delta = false;
    const PseudoOrbit po = make_noisy_orbit(slow, sc, {0.3, 0.2}, 30, 0.1, 1, opts);
    CHECK(po.valid());
    const ShadowCertificate cert = shadow_point(slow, sc, po);
    CHECK(cert.pass);
    CHECK(cert.distance_to_x0 <= cert.q_x0 / 50.0);
}
