#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pwh/geometry.hpp"
#include "pwh/parallel.hpp"
#include "pwh/systems.hpp"

namespace pwh {

struct ScaleParams {
    double alpha = 1.0;
    double beta = 0.5;
    double gamma = 1.1;
    double delta = 0.2;
    double eps = 0.3;
    double r0 = 0.25;
    double c_u = 1.01;
    double c_s = 1.01;
    /// max over the torus of max{|Df|, |Df^{-1}|}; see estimate_c_f.
    double c_f = 0.0;
    /// Constant C_0 with C_0 eps(x) below the rate margins; 0 until fitted by check_rate_margins.
    double c_0 = 0.0;
    double rho = kRho;

    /// Throws ConfigError naming the violated condition.
    void validate() const;
    /// eps^{2/(alpha-delta)}, the prefactor of Q.
    double q_prefactor() const;
    /// Largest value Q takes (the interior value).
    double q_max() const;
};

/// eps * min{r0^beta, d^beta}.
double eps_fn(const ScaleParams& s, double d_boundary);
/// eps^{2/(alpha-delta)} * min{r0^gamma, d^gamma}, with its two derived inequalities checked.
double q_fn(const ScaleParams& s, double d_boundary);

double eps_at(const ScaleParams& s, const SystemSpec& sys, const Point& x);
double q_at(const ScaleParams& s, const SystemSpec& sys, const Point& x);
/// eps * eps(x), the budget appearing in every block estimate.
double eps_eps_at(const ScaleParams& s, const SystemSpec& sys, const Point& x);

/// Grid estimate of max{|Df|, |Df^{-1}|}, inflated by 1% to cover the gaps between nodes.
double estimate_c_f(const SystemSpec& sys, int resolution = 64);

/// Copy of `s` with c_f filled in from estimate_c_f when it is unset.
ScaleParams with_c_f(ScaleParams s, const SystemSpec& sys);

/// 1/2 min{eps eps(x), rho - sqrt(2) C^f Q(x)} before refinement.
double delta_u_base(const ScaleParams& s, const SystemSpec& sys, const Point& x);

/// delta_u_base halved until the block estimates pass at probe targets near f(x).
double delta_u_fn(const ScaleParams& s, const SystemSpec& sys, const Point& x, int n_iters = 30);
/// Stable counterpart: delta_u of the inverse system.
double delta_s_fn(const ScaleParams& s, const SystemSpec& sys, const Point& x, int n_iters = 30);

struct RateMarginSample {
    Point x;
    double d_boundary = 0.0;
    double lhs = 0.0;       ///< eps * eps(x)
    double min_side = 0.0;  ///< min{m_u - 1, m_s_inv - 1, 1 - n_s}
    double slack = 0.0;
    bool skipped = false;   ///< below the distance floor
};

struct RateMarginReport {
    bool pass = true;
    std::vector<RateMarginSample> samples;
    std::optional<RateMarginSample> worst;
    /// Largest C0 with C0 eps(x) < min_side at every sample (strictly, up to 1e-9 relative).
    double c0_fit = 0.0;
    /// Smallest eps at which some sample fails: min over samples of sqrt(min_side / min{r0^b, d^b}).
    double eps_threshold = 0.0;
    /// Proof-internal diagnostics.
    double a0 = 0.0;  ///< inf (sqrt(n_s) - n_s) / (1 - n_s)
    double a1 = 0.0;  ///< inf (m_u - 1) / eps(x)
    double a2 = 0.0;  ///< inf (1 - n_s) / eps(x)
    double b = 0.0;   ///< inf over samples of m_u
    /// The proof's smallness test 1/(b^beta C^f) vs eps; not applicable without a boundary.
    bool smallness_applicable = false;
    double smallness_value = 0.0;
    int failures = 0;
    int skipped = 0;
};

/// Splitting-based check of eps eps(x) < min{m_u - 1, m_s_inv - 1, 1 - n_s}.
RateMarginReport check_rate_margins(const ScaleParams& s, const SystemSpec& sys, const std::vector<Point>& samples,
                                    double d_min = 1e-3, int n_iters = 30, Execution exec = Execution::parallel);

struct EpsSweepStep {
    double eps = 0.0;
    int failures = 0;
};

/// Doubling sweep from the configured eps until failure, then bisection of the onset.
/// Failure counts are computed from the rates stored in `report`.
std::vector<EpsSweepStep> eps_threshold_sweep(const ScaleParams& s, const RateMarginReport& report, int bisections = 40);

struct QComparabilityReport {
    bool pass = true;
    int tested = 0;
    int excluded = 0;  ///< pairs failing the precondition d(x,y) <= Q(x)
    double min_ratio = 1.0;
    double max_ratio = 1.0;
    std::optional<std::pair<Point, Point>> worst_pair;
    bool smallness_lower = false;  ///< eps < (1 - 2^{-1/gamma})^{(alpha-delta)/2}
    bool smallness_upper = false;  ///< eps < (2^{1/gamma} - 1)^{(alpha-delta)/2}
};

QComparabilityReport check_q_comparability(const ScaleParams& s, const SystemSpec& sys,
                                           const std::vector<std::pair<Point, Point>>& pairs);

}  // namespace pwh
