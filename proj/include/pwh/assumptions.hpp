#pragma once

#include <optional>
#include <vector>

#include "pwh/geometry.hpp"
#include "pwh/parallel.hpp"
#include "pwh/scales.hpp"
#include "pwh/systems.hpp"

namespace pwh {

/// Truncated forward/backward rate products at one sample.
struct ProductSample {
    Point x;
    double forward = 0.0;
    double backward = 0.0;
    bool pass = false;
};

/// Two-term rate inequality (the (ii) parts of U and S) over the near-boundary samples.
struct RateWitness {
    bool pass = true;
    bool vacuous = true;  ///< no sample within r0 of the boundary
    int tested = 0;
    /// Largest C making the inequality hold at every sample (with the configured exponents).
    double c_fit = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    /// min over samples of (rate - 1) - C max{d^beta, ratio^gamma - 1} with the configured C.
    double worst_slack = 0.0;
    std::optional<Point> worst_point;
};

struct AssumptionReport {
    std::vector<ProductSample> u1;
    std::vector<ProductSample> s1;
    bool u1_pass = true;
    bool s1_pass = true;
    RateWitness u2;
    RateWitness s2;
    bool r_pass = false;
    double r_margin = 0.0;  ///< alpha - beta/gamma - delta
    bool k_pass = true;
    double k_slack = 0.0;  ///< min over samples of RHS - LHS
    std::optional<Point> k_worst;
    /// max |Df(x) - Df(y)| / |x - y|^alpha over nearby sample pairs.
    double holder_fit = 0.0;
    std::vector<Point> counterexamples;
    bool pass() const { return u1_pass && s1_pass && u2.pass && s2.pass && r_pass && k_pass; }
};

struct AssumptionOptions {
    int resolution = 16;  ///< grid is resolution x resolution; polar rings use the same count
    int window = 20;      ///< K for the truncated products
    double pi_min = 1e6;
    /// Rate samples lie in [inner_fraction r0, r0] around each boundary point.
    double inner_fraction = 0.3;
    int n_iters = 30;
    Execution exec = Execution::parallel;
};

AssumptionReport verify_assumptions(const SystemSpec& sys, const ScaleParams& scales,
                                    const AssumptionOptions& opts = {});

}  // namespace pwh
