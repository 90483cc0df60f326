#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pwh/geometry.hpp"
#include "pwh/pchip.hpp"
#include "pwh/scales.hpp"
#include "pwh/splitting.hpp"
#include "pwh/systems.hpp"

namespace pwh {

/// F_xy = exp_y^{-1} o f o exp_x written in the splitting frames at x and y.
/// Frame coordinates are (u, s) components.
class LocalMapData {
public:
    LocalMapData(SystemSpec sys, ScaleParams scales, Point x, Point y, Splitting frame_x, Splitting frame_y);

    const SystemSpec& system() const { return sys_; }
    const ScaleParams& scales() const { return scales_; }
    const Point& x() const { return x_; }
    const Point& y() const { return y_; }
    const Splitting& frame_x() const { return frame_x_; }
    const Splitting& frame_y() const { return frame_y_; }

    double d_uu = 0.0, d_us = 0.0, d_su = 0.0, d_ss = 0.0;
    /// F_xy(0) in frame coordinates at y.
    TangentVector offset;
    double eps_eps = 0.0;  ///< eps * eps(x)
    double q_x = 0.0;      ///< Q(x)
    double q_y = 0.0;      ///< Q(y)
    double gap = 0.0;      ///< d(f(x), y)

    /// F_xy at frame coordinates c at x, returned in frame coordinates at y.
    TangentVector apply(const TangentVector& c) const;
    /// F_xy^{-1}: frame coordinates at y to frame coordinates at x.
    TangentVector apply_inverse(const TangentVector& c) const;
    /// phi_xy(c) = F_xy(c) - D_0F_xy c.
    TangentVector remainder(const TangentVector& c) const;
    /// D phi_xy at c, in frame coordinates.
    Mat2 remainder_derivative(const TangentVector& c) const;
    Mat2 blocks() const { return {d_uu, d_us, d_su, d_ss}; }

private:
    SystemSpec sys_;
    ScaleParams scales_;
    Point x_, y_;
    Splitting frame_x_, frame_y_;
    Mat2 df_x_;
};

/// Builds the local map with frames computed here. Requires d(f(x), y) < delta^u(x).
LocalMapData local_map(const SystemSpec& sys, const ScaleParams& scales, const Point& x, const Point& y,
                       int n_iters = 30);

/// Same, with caller-supplied frames and no distance gate (for pipelines that validated already).
LocalMapData local_map_with_frames(const SystemSpec& sys, const ScaleParams& scales, const Point& x,
                                   const Point& y, const Splitting& frame_x, const Splitting& frame_y);

struct BlockReport {
    bool pass = false;
    double budget = 0.0;  ///< eps * eps(x)
    double slack_us = 0.0, slack_su = 0.0, slack_uu = 0.0, slack_ss = 0.0;
    double lipschitz = 0.0;  ///< sampled max |D phi|
    double slack_lipschitz = 0.0;
    double holder = 0.0;  ///< sampled max |D phi(v) - D phi(w)| / |v-w|^{delta/2}
    double slack_holder = 0.0;
    double worst_slack() const;
};

/// The four block bounds plus the remainder Lipschitz and Holder bounds. The remainder is sampled on a samples x samples grid of the Q(x) box.
BlockReport block_estimates(const LocalMapData& lm, int samples = 5);

enum class ManifoldKind { unstable, stable };

inline constexpr int kGridPoints = 257;

/// Graph {(v, phi(v))} (unstable) or {(phi(v), v)} (stable) over [-radius, radius] in the frame at base.
struct AdmissibleManifold {
    Point base;
    ManifoldKind kind = ManifoldKind::unstable;
    double radius = 0.0;
    Splitting frame;
    std::vector<double> phi;
    std::vector<double> dphi;

    static AdmissibleManifold from_values(const Point& base, ManifoldKind kind, double radius,
                                          const Splitting& frame, std::vector<double> phi);
    static AdmissibleManifold zero(const Point& base, ManifoldKind kind, double radius, const Splitting& frame,
                                   int n_grid = kGridPoints);
    template <class Fn>
    static AdmissibleManifold from_function(const Point& base, ManifoldKind kind, double radius,
                                            const Splitting& frame, Fn&& fn, int n_grid = kGridPoints) {
        std::vector<double> vals(static_cast<std::size_t>(n_grid));
        for (int i = 0; i < n_grid; ++i) vals[static_cast<std::size_t>(i)] = fn(-radius + 2.0 * radius * i / (n_grid - 1));
        return from_values(base, kind, radius, frame, std::move(vals));
    }

    int size() const { return static_cast<int>(phi.size()); }
    double spacing() const { return 2.0 * radius / (size() - 1); }
    double node(int i) const { return -radius + 2.0 * radius * i / (size() - 1); }
    /// Interpolated phi; v must lie in [-radius, radius].
    double evaluate(double v) const;
    /// Frame coordinates (u, s) of the graph point over v.
    TangentVector frame_point(double v) const;
    /// Point exp_base of the graph point over v.
    Point point_at(double v) const;

private:
    Pchip interp_;
};

/// 4th-order finite differences on a uniform grid (one-sided stencils at the ends).
std::vector<double> finite_difference(const std::vector<double>& f, double h);

struct AdmissibilityReport {
    bool pass = false;
    double phi0 = 0.0;       ///< |phi(0)|
    double max_dphi = 0.0;   ///< max |D phi|
    double holder = 0.0;     ///< discrete Holder-delta/2 seminorm
    /// Slack of each bound divided by its limit.
    double slack_value = 0.0, slack_slope = 0.0, slack_holder = 0.0;
    /// 0: |phi(0)| bound, 1: slope bound, 2: Holder-norm bound.
    int tightest = 0;
};

AdmissibilityReport admissibility_check(const AdmissibleManifold& w, const ScaleParams& scales);

/// Push an unstable manifold at x through F_xy and reparametrize it over the E^u axis at y.
AdmissibleManifold graph_transform_u(const LocalMapData& lm, const AdmissibleManifold& w);
/// Pull a stable manifold at y back through F_xy^{-1} to x.
AdmissibleManifold graph_transform_s(const LocalMapData& lm, const AdmissibleManifold& w);

struct ContractionReport {
    double factor = 0.0;
    double bound = 0.0;      ///< sqrt(|Df|E^s(x)|) (unstable) or sqrt(|Df^{-1}|E^u(y)|) (stable)
    double tolerance = 0.0;  ///< 2 * grid spacing of the output
    bool pass = false;
};

/// sup|T phi1 - T phi2| / sup|phi1 - phi2|. Throws IdenticalInputs when the inputs coincide.
ContractionReport contraction_factor(const LocalMapData& lm, const AdmissibleManifold& w1,
                                     const AdmissibleManifold& w2);

/// Columns v, phi, dphi.
void write_manifold_csv(const AdmissibleManifold& w, std::ostream& out);

}  // namespace pwh
