#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "pwh/errors.hpp"
#include "pwh/scales.hpp"
#include "pwh/systems.hpp"

using namespace pwh;

namespace {

std::string config_message(const ScaleParams& s) {
    try {
        s.validate();
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        return e.what();
    }
    return "";
}

std::vector<Point> uniform_points(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> out;
    for (int i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng));
    return out;
}

}  // namespace

TEST_CASE("default scales on the cat map") {
    const SystemSpec cat = build_cat_map();
    const ScaleParams s = with_c_f(ScaleParams{}, cat);
    CHECK_NOTHROW(s.validate());
    // 0.3^{2/0.8} * 0.25^{1.1}
    CHECK(s.q_max() == doctest::Approx(0.0107292).epsilon(1e-5));
    CHECK(eps_eps_at(s, cat, {0.4, 0.1}) == doctest::Approx(0.045).epsilon(1e-12));
    CHECK(q_at(s, cat, {0.4, 0.1}) == doctest::Approx(s.q_max()).epsilon(1e-15));
    CHECK(s.c_f == doctest::Approx(1.01 * cat_eigen().lambda_u).epsilon(1e-9));
    CHECK(delta_u_base(s, cat, {0.4, 0.1}) == doctest::Approx(0.0225).epsilon(1e-12));
    // The cat map is linear, so no refinement is needed.
    CHECK(delta_u_fn(s, cat, {0.4, 0.1}) == doctest::Approx(0.0225).epsilon(1e-12));
}

TEST_CASE("validation names the violated condition") {
    ScaleParams s;
    s.delta = s.alpha - s.beta / s.gamma;  // delta = alpha - beta/gamma is not allowed
    CHECK(config_message(s).find("Assumption R") != std::string::npos);
    s = ScaleParams{};
    s.gamma = 1.0;
    CHECK(!config_message(s).empty());
    s = ScaleParams{};
    s.eps = 1.5;
    CHECK(config_message(s).find("eps") != std::string::npos);
    s = ScaleParams{};
    s.c_u = 1.0;
    CHECK(!config_message(s).empty());
}

TEST_CASE("scale functions in the boundary distance") {
    const ScaleParams s;
    CHECK(eps_fn(s, 0.5) == eps_fn(s, 0.25));
    CHECK(q_fn(s, 0.9) == q_fn(s, 0.25));
    double prev_e = 0.0, prev_q = 0.0;
    for (int k = 0; k <= 400; ++k) {
        const double d = std::pow(10.0, -6.0 + 6.0 * k / 400.0);
        const double e = eps_fn(s, d), q = q_fn(s, d);
        CHECK(e >= prev_e);
        CHECK(q >= prev_q);
        CHECK(q < d);
        prev_e = e;
        prev_q = q;
    }
    CHECK(eps_fn(s, 0.01) == doctest::Approx(0.3 * 0.1).epsilon(1e-14));
    CHECK_THROWS_AS(q_fn(s, 0.0), Error);
    CHECK_THROWS_AS(eps_fn(s, -1.0), Error);
}

TEST_CASE("rate margins on the cat map") {
    const SystemSpec cat = build_cat_map();
    const ScaleParams s = with_c_f(ScaleParams{}, cat);
    const std::vector<Point> pts = uniform_points(500, 7);
    const RateMarginReport r = check_rate_margins(s, cat, pts);
    CHECK(r.pass);
    CHECK(r.failures == 0);
    // min side is 1 - lambda_s and eps(x) = 0.15 everywhere.
    const double side = 1.0 - cat_eigen().lambda_s;
    CHECK(r.c0_fit == doctest::Approx(side / 0.15).epsilon(1e-8));
    CHECK(r.eps_threshold == doctest::Approx(std::sqrt(side / 0.5)).epsilon(1e-8));
    CHECK_FALSE(r.smallness_applicable);

    const std::vector<EpsSweepStep> sweep = eps_threshold_sweep(s, r);
    REQUIRE(!sweep.empty());
    for (const EpsSweepStep& a : sweep) {
        for (const EpsSweepStep& b : sweep) {
            if (a.eps < b.eps) CHECK(a.failures <= b.failures);
        }
        if (a.eps < r.eps_threshold * (1 - 1e-9)) CHECK(a.failures == 0);
        if (a.eps > r.eps_threshold * (1 + 1e-9)) CHECK(a.failures > 0);
    }
}

TEST_CASE("rate margins fail once eps passes the threshold") {
    const SystemSpec cat = build_cat_map();
    ScaleParams s = with_c_f(ScaleParams{}, cat);
    s.eps = 0.99;
    s.r0 = 0.9;  // eps eps(x) = 0.99^2 * 0.9^0.5 > 1 - lambda_s
    const RateMarginReport r = check_rate_margins(s, cat, uniform_points(50, 8));
    CHECK_FALSE(r.pass);
    CHECK(r.failures == 50);
}

TEST_CASE("rate margins near the slowed fixed point") {
    const SystemSpec slow = build_slowdown_map(0.15, 0.5);
    const ScaleParams s = with_c_f(ScaleParams{}, slow);
    std::vector<Point> pts;
    for (int i = 0; i < 40; ++i) {
        const double r = 0.002 + 0.2 * i / 39.0, th = 0.7 * i;
        pts.push_back(exp_map({0.0, 0.0}, {r * std::cos(th), r * std::sin(th)}));
    }
    const RateMarginReport serial = check_rate_margins(s, slow, pts, 1e-3, 3000, Execution::serial);
    const RateMarginReport parallel = check_rate_margins(s, slow, pts, 1e-3, 3000, Execution::parallel);
    CHECK(serial.pass);
    CHECK(serial.c0_fit == parallel.c0_fit);
    CHECK(serial.eps_threshold == parallel.eps_threshold);
    REQUIRE(serial.samples.size() == parallel.samples.size());
    for (std::size_t i = 0; i < serial.samples.size(); ++i) CHECK(serial.samples[i].slack == parallel.samples[i].slack);
}

TEST_CASE("Q comparability") {
    const SystemSpec slow = build_slowdown_map(0.15, 0.5);
    const ScaleParams s = with_c_f(ScaleParams{}, slow);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::pair<Point, Point>> pairs;
    for (int i = 0; i < 2000; ++i) {
        const double r = 0.002 + 0.3 * u(rng), th = 6.283185307179586 * u(rng);
        const Point x = exp_map({0.0, 0.0}, {r * std::cos(th), r * std::sin(th)});
        const double q = q_at(s, slow, x) * std::sqrt(u(rng)), ph = 6.283185307179586 * u(rng);
        pairs.emplace_back(x, exp_map(x, {q * std::cos(ph), q * std::sin(ph)}));
    }
    const QComparabilityReport r = check_q_comparability(s, slow, pairs);
    CHECK(r.pass);
    CHECK(r.tested == 2000);
    CHECK(r.min_ratio >= 0.5);
    CHECK(r.max_ratio <= 2.0);
    CHECK(r.min_ratio < 1.0);
}
