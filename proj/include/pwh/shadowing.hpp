#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pwh/geometry.hpp"
#include "pwh/graphs.hpp"
#include "pwh/parallel.hpp"
#include "pwh/scales.hpp"
#include "pwh/splitting.hpp"
#include "pwh/systems.hpp"

namespace pwh {

/// strict: steps bounded by delta^u(x) Q(x)^2 Q(f x); relaxed: by delta^u(x) alone.
enum class GapMode { strict, relaxed };

struct StepCheck {
    double forward_gap = 0.0;    ///< d(f(x_n), x_{n+1})
    double forward_bound = 0.0;
    double backward_gap = 0.0;   ///< d(f^{-1}(x_{n+1}), x_n)
    double backward_bound = 0.0;
    bool forward_ok() const { return forward_gap < forward_bound; }
    bool backward_ok() const { return backward_gap < backward_bound; }
    bool ok() const { return forward_ok() && backward_ok(); }
};

/// Finite window x_{-K} .. x_K of a pointwise pseudo orbit with cached per-point data.
struct PseudoOrbit {
    int K = 0;
    std::vector<Point> points;      ///< index n + K
    std::vector<StepCheck> steps;   ///< step n -> n+1 stored at n + K, size 2K
    std::vector<Splitting> frames;  ///< splitting at each point
    std::vector<double> q;          ///< Q(x_n)
    double stable_product = 0.0;        ///< prod_{i=0}^{K} |Df|E^s(x_{-i})|
    double unstable_inv_product = 0.0;  ///< prod_{i=0}^{K} |Df^{-1}|E^u(x_i)|
    bool products_ok = false;

    const Point& at(int n) const { return points[static_cast<std::size_t>(n + K)]; }
    bool steps_ok() const;
    bool valid() const { return steps_ok() && products_ok; }
};

struct OrbitOptions {
    GapMode mode = GapMode::strict;
    double d_min = 1e-3;
    int n_iters = 30;
    /// Contracting truncated products must fall below this.
    double product_threshold = 1e-6;
    /// Diagnostic only: when false, delta^u and delta^s are the unrefined half-min values
    /// and the block estimates are not enforced.
    bool refine_delta = true;
};

/// Noisy orbit with x_{n+1} = f(x_n) + kick, kick uniform in the disk of radius
/// kick_fraction * bound(x_n); both step conditions are enforced by resampling
/// (up to 100 draws). For kick_fraction >= 1 kicks are drawn from the annulus
/// [bound, kick_fraction * bound] and nothing is resampled, so every step is invalid.
PseudoOrbit make_noisy_orbit(const SystemSpec& sys, const ScaleParams& scales, const Point& x0, int K,
                             double kick_fraction, std::uint64_t seed, const OrbitOptions& opts = {});

/// Pseudo orbit made of given points (for example a true orbit of a perturbed map).
/// Step data are computed but nothing is enforced; check valid() or validate_pseudo_orbit.
PseudoOrbit pseudo_orbit_from_points(const SystemSpec& sys, const ScaleParams& scales, std::vector<Point> points,
                                     const OrbitOptions& opts = {});

/// The window of half-width K centred at index n of `po` (n relative to po's centre),
/// reusing the cached per-point data; products are recomputed for the new centre.
PseudoOrbit sub_window(const PseudoOrbit& po, int n, int K, const OrbitOptions& opts = {});

struct ValidationReport {
    bool pass = false;
    std::optional<int> first_failing_step;  ///< n such that the step x_n -> x_{n+1} fails
    std::vector<StepCheck> steps;
    double stable_product = 0.0;
    double unstable_inv_product = 0.0;
    bool products_ok = false;
};

/// Recomputes both step conditions and the product surrogates from scratch.
ValidationReport validate_pseudo_orbit(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                                       const OrbitOptions& opts = {});

using ManifoldSeed =
    std::function<AdmissibleManifold(const Point& base, ManifoldKind kind, double radius, const Splitting& frame)>;

struct ManifoldLimit {
    AdmissibleManifold manifold;
    int depth = 0;
    double increment = 0.0;  ///< sup difference between the last two depths
    /// prod over the depth of sqrt(|Df|E^s|) (unstable) or sqrt(|Df^{-1}|E^u|) (stable).
    double product_bound = 0.0;
};

struct ManifoldOptions {
    double tol = 1e-11;
    int min_depth = 1;
    ManifoldSeed seed;  ///< zero graphs when empty
};

/// Limit of transforms of seeds placed at x_{-n} for growing n, pushed to x_0.
ManifoldLimit local_unstable_manifold(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                                      const ManifoldOptions& opts = {});
/// Same with seeds at x_n pulled back to x_0.
ManifoldLimit local_stable_manifold(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                                    const ManifoldOptions& opts = {});

/// The depth-n iterate only, for seed-comparison experiments.
ManifoldLimit manifold_at_depth(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                                ManifoldKind kind, int depth, const ManifoldSeed& seed = {});

struct ShadowCertificate {
    Point shadow;
    double distance_to_x0 = 0.0;
    double q_x0 = 0.0;
    int containment_horizon = 0;
    double fixed_point_residual = 0.0;
    /// max over the window of d(f(z_n), z_{n+1}) for the intersection points z_n.
    double orbit_residual = 0.0;
    /// Largest |n| for which direct iteration of f from the shadow stays in the boxes.
    int direct_horizon = 0;
    /// max over n of the box components of log_{x_n}(z_n) divided by Q(x_n).
    double max_box_ratio = 0.0;
    std::vector<Point> orbit;  ///< z_{-K} .. z_K
    bool pass = false;
};

struct ShadowOptions {
    double tol = 1e-14;
    int max_iter = 200;
    /// Starting point of the fixed-point iteration, as a fraction of Q(x_n).
    double initial_fraction = 0.0;
    /// Tolerance on d(f(z_n), z_{n+1}) for counting z_n as the orbit of the shadow.
    double orbit_tol = 1e-10;
};

/// Intersections z_n of the unstable and stable manifolds along the whole window.
/// z_0 is the shadow; the certificate checks the Q(x_0)/50 bound and box containment.
ShadowCertificate shadow_point(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                               const ShadowOptions& opts = {});

/// Shadow of the linearized problem c_{n+1} = D_n c_n + o_n in the splitting frames, with
/// D_n the block matrix of step n, o_n its offset, s-component of c_{-K} = 0 and
/// u-component of c_K = 0. Stable components are swept forward, unstable ones backward,
/// alternating until the sweep changes nothing. For a linear map this is the exact shadow.
struct LinearShadow {
    Point shadow;
    std::vector<TangentVector> offsets;  ///< c_n in the frame at x_n
    int sweeps = 0;
};
LinearShadow linearized_shadow(const SystemSpec& sys, const ScaleParams& scales, const PseudoOrbit& po,
                               int max_sweeps = 100);

struct ExpansivityVerdict {
    bool separated = false;
    int n = 0;  ///< separating time when separated
    double distance = 0.0;
    double radius = 0.0;
};

/// Smallest |n| <= K (positive first on ties) with d(f^n x, f^n y) > Q(f^n x).
ExpansivityVerdict expansivity_test(const SystemSpec& sys, const ScaleParams& scales, const Point& x, const Point& y,
                                    int K);

struct ShadowJob {
    Point x0;
    int K = 100;
    double kick_fraction = 0.0;
    std::uint64_t seed = 0;
};

struct ShadowJobResult {
    ShadowJob job;
    bool ok = false;  ///< orbit valid and certificate passes
    std::optional<ShadowCertificate> certificate;
    bool orbit_valid = false;
    std::string error;
};

/// Orbit generation plus certification for a batch of seeds. Results are indexed like the jobs.
std::vector<ShadowJobResult> certify_batch(const SystemSpec& sys, const ScaleParams& scales,
                                           const std::vector<ShadowJob>& jobs, const OrbitOptions& orbit_opts = {},
                                           const ShadowOptions& shadow_opts = {},
                                           Execution exec = Execution::parallel);

}  // namespace pwh
