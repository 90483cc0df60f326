#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "pwh/geometry.hpp"
#include "pwh/parallel.hpp"
#include "pwh/scales.hpp"
#include "pwh/shadowing.hpp"
#include "pwh/systems.hpp"

namespace pwh {

/// Tolerance on d(h(g x), f(h x)).
inline constexpr double kConjugacyTol = 1e-9;

struct ConjugacyEntry {
    Point x;
    Point h_x;
    double residual = 0.0;      ///< d(h(g x), f(h x)) from two independent shadow solves
    double displacement = 0.0;  ///< d(h(x), x)
    double q = 0.0;             ///< Q(x)
    /// Smallest d(g^n x, support) - radius over the window; +inf without a support.
    double support_clearance = 0.0;
    bool ok = false;
    std::string error;

    bool avoids_support() const { return support_clearance > 0.0; }
};

struct ConjugacyField {
    int resolution = 0;
    int window_K = 0;
    std::vector<ConjugacyEntry> entries;  ///< row-major over x = (i/n, j/n), excluded points skipped
    double sup_residual = 0.0;
    double sup_displacement = 0.0;
    double sup_displacement_ratio = 0.0;  ///< max displacement / Q(x)
    /// max displacement over points whose window avoids the support.
    double sup_identity_error = 0.0;
    int failures = 0;

    double spacing() const { return 1.0 / resolution; }
};

/// h(x): shadow, for f, of the g-orbit window of x. Throws PseudoOrbitInvalid if the
/// window is not a pseudo orbit of f.
Point conjugacy_point(const SystemSpec& f, const SystemSpec& g, const ScaleParams& scales, const Point& x, int K,
                      const OrbitOptions& orbit_opts = {}, const ShadowOptions& shadow_opts = {});

/// h on the resolution x resolution corner grid with residuals; per-point failures are recorded.
ConjugacyField conjugacy_field(const SystemSpec& f, const SystemSpec& g, const ScaleParams& scales, int resolution,
                               int K, const OrbitOptions& orbit_opts = {}, const ShadowOptions& shadow_opts = {},
                               Execution exec = Execution::parallel);

/// Smallest K <= max_K such that every candidate y staying Q-close to f^n h(x) for |n| <= K
/// lies within lambda of h(x). Candidates are the field's h-values plus rings around h(x).
/// Throws ProbeInconclusive when max_K is not enough.
int continuity_probe(const SystemSpec& f, const ScaleParams& scales, const ConjugacyField& field, const Point& x,
                     double lambda, int max_K = 20);

struct InjectivityPair {
    Point x, y;
    bool trivial = false;  ///< x == y
    bool separated = false;
    int n0 = 0;
    double distance = 0.0;
    double radius = 0.0;
    /// (1/25) eps^{2/(alpha-delta)} r0^gamma < radius at the separating time.
    bool lower_bound_ok = false;
};

struct InjectivityReport {
    bool pass = false;
    int resolved = 0;
    int trivial = 0;
    std::vector<InjectivityPair> pairs;
    std::vector<std::size_t> unresolved;
};

/// For each pair looks for |n| <= max_n with d(g^n x, g^n y) > Q(g^n x).
InjectivityReport injectivity_probe(const SystemSpec& g, const ScaleParams& scales,
                                    const std::vector<std::pair<Point, Point>>& pairs, int max_n = 8);

struct SurjectivityReport {
    bool pass = false;
    double cover_radius = 0.0;
    double worst_gap = 0.0;  ///< max over cell centres of the distance to the nearest image point
    std::optional<Point> worst_center;
    int uncovered = 0;
};

/// Every cell centre ((i+1/2)/n, (j+1/2)/n) must have an image point h(x) within cover_radius.
SurjectivityReport surjectivity_probe(const ConjugacyField& field, double cover_radius);

/// Columns x_u, x_v, h_u, h_v, residual, displacement, q, ok.
void write_field_csv(const ConjugacyField& field, std::ostream& out);

}  // namespace pwh
