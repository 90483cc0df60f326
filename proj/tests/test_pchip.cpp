#include <doctest.h>

#include <cmath>

#include "pwh/pchip.hpp"

using pwh::Pchip;

TEST_CASE("pchip interpolates and reproduces linear data") {
    std::vector<double> x, y;
    for (int i = 0; i <= 10; ++i) {
        x.push_back(0.1 * i);
        y.push_back(3.0 - 2.0 * x.back());
    }
    const Pchip p(x, y);
    for (int i = 0; i <= 10; ++i) CHECK(p(x[static_cast<std::size_t>(i)]) == doctest::Approx(y[static_cast<std::size_t>(i)]));
    for (double t : {0.05, 0.33, 0.999}) {
        CHECK(p(t) == doctest::Approx(3.0 - 2.0 * t).epsilon(1e-14));
        CHECK(p.derivative(t) == doctest::Approx(-2.0).epsilon(1e-14));
    }
}

TEST_CASE("pchip preserves monotonicity") {
    // A step-like sequence where an unconstrained cubic spline would overshoot.
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<double> y{0.0, 0.0, 0.1, 5.0, 5.0, 5.1};
    const Pchip p(x, y);
    double prev = p(0.0);
    for (int i = 1; i <= 500; ++i) {
        const double v = p(5.0 * i / 500.0);
        CHECK(v >= prev - 1e-15);
        CHECK(v <= 5.1 + 1e-15);
        prev = v;
    }
    CHECK(p.segment(2.5) == 2);
    CHECK(p.segment(-1.0) == 0);
    CHECK(p.segment(9.0) == 4);
}

TEST_CASE("pchip is continuously differentiable at knots") {
    std::vector<double> x, y;
    for (int i = 0; i <= 20; ++i) {
        x.push_back(0.05 * i);
        y.push_back(std::sin(3.0 * x.back()));
    }
    const Pchip p(x, y);
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        CHECK(p.derivative_segment(i - 1, x[i]) == doctest::Approx(p.derivative_segment(i, x[i])).epsilon(1e-12));
        CHECK(p.eval_segment(i - 1, x[i]) == doctest::Approx(p.eval_segment(i, x[i])).epsilon(1e-14));
    }
    CHECK(p(0.512) == doctest::Approx(std::sin(3.0 * 0.512)).epsilon(1e-3));
}
