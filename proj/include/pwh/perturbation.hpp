#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "pwh/geometry.hpp"
#include "pwh/scales.hpp"
#include "pwh/systems.hpp"

namespace pwh {

/// g(x) = f(x) + A b(|x - c| / R) dir with b(t) = exp(1 - 1/(1 - t^2)) on t < 1.
struct BumpParams {
    Point center{0.3, 0.6};
    double amplitude = 0.0;
    double radius = 0.1;
    /// Angle of the displacement direction in the flat chart.
    double direction_angle = 0.0;
};

/// Value and gradient (in x) of the unit-amplitude bump profile.
struct BumpValue {
    double value = 0.0;
    TangentVector gradient;
};
BumpValue bump_profile(const BumpParams& bump, const Point& x);

struct BudgetSample {
    Point x;
    double c0_gap = 0.0;  ///< d(f(x), g(x))
    double c1_gap = 0.0;  ///< |D_x f - D_x g|
    double bound = 0.0;   ///< xi(x) delta^u(x) Q(x)^2 Q(f(x)); 0 where both gaps vanish
};

struct PerturbationBudget {
    double xi0 = 0.5;
    int grid = 64;
    std::vector<BudgetSample> samples;
    /// max over samples of max{gap} / bound.
    double worst_ratio = 0.0;
    std::optional<Point> worst_point;

    double xi(const Point&) const { return xi0; }
};

struct PerturbationOptions {
    double xi0 = 0.5;
    int grid = 64;
    int n_iters = 30;
    Execution exec = Execution::parallel;
};

/// Adds the bump to f after checking support placement and the budget on a grid.
/// Throws SupportTouchesBoundary or BudgetExceeded (with the worst grid point).
std::pair<SystemSpec, PerturbationBudget> build_perturbation(const SystemSpec& f, const ScaleParams& scales,
                                                             const BumpParams& bump,
                                                             const PerturbationOptions& opts = {});

/// Largest amplitude for which the budget holds on the verification grid.
double max_bump_amplitude(const SystemSpec& f, const ScaleParams& scales, BumpParams bump,
                          const PerturbationOptions& opts = {});

/// The perturbed map alone, without budget checks.
SystemSpec make_bumped_system(const SystemSpec& f, const BumpParams& bump);

}  // namespace pwh
