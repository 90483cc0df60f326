#pragma once

#include <vector>

#include "pwh/geometry.hpp"
#include "pwh/scales.hpp"
#include "pwh/systems.hpp"

namespace pwh {

/// Invariant directions and one-step rates at a point.
struct Splitting {
    TangentVector e_u;
    TangentVector e_s;
    double m_u = 0.0;      ///< m(Df|E^u(x))
    double n_s = 0.0;      ///< |Df|E^s(x)|
    double m_s_inv = 0.0;  ///< m(Df^{-1}|E^s(x))
    double n_u_inv = 0.0;  ///< |Df^{-1}|E^u(x)|
    int iterations_u = 0;
    int iterations_s = 0;

    /// |det(e_u, e_s)|.
    double frame_det() const { return std::abs(e_u.cross(e_s)); }
    /// Components (u, s) of v in the frame.
    TangentVector to_frame(const TangentVector& v) const;
    /// Vector with frame components (cu, cs).
    TangentVector from_frame(double cu, double cs) const { return cu * e_u + cs * e_s; }
    Mat2 basis() const { return Mat2::from_columns(e_u, e_s); }
};

inline constexpr double kSplittingTol = 1e-12;
inline constexpr double kMinFrameDet = 0.05;

/// Power iteration for E^u along the backward orbit and E^s along the forward orbit.
/// Stops when the direction moves by less than 1e-12 (sine of the angle).
Splitting compute_splitting(const SystemSpec& sys, const Point& x, int n_iters = 30);

/// Apertures of the unstable and stable cones at a point.
struct ConeApertures {
    double kappa_u = 0.0;
    double kappa_s = 0.0;
};

/// Cone apertures from the rates; `eps_eps` is the product eps * eps(x).
ConeApertures cone_aperture(const Splitting& split, double eps_eps);

/// Cones of f evaluated on demand at any point.
class ConeFamily {
public:
    ConeFamily(SystemSpec f, const ScaleParams& scales, int n_iters = 30);

    struct At {
        Splitting frame;
        ConeApertures kappa;
        double eps_eps = 0.0;
    };
    At at(const Point& x) const;
    const SystemSpec& system() const { return f_; }
    int n_iters() const { return n_iters_; }
    const ScaleParams& scales() const { return scales_; }

private:
    SystemSpec f_;
    ScaleParams scales_;
    int n_iters_;
};

struct ConeCheck {
    bool pass = false;
    /// 1 - worst ratio |v_s| / (kappa |v_u|) over sampled image directions.
    double margin_u = 0.0;
    double margin_s = 0.0;
    double margin() const { return std::min(margin_u, margin_s); }
};

/// Pushes sampled directions of C^u_x through Dg(x) and of C^s_{g x} through Dg^{-1}(g x).
ConeCheck cone_invariance_check(const SystemSpec& g, const ConeFamily& cones, const Point& x, int n_dirs = 33);

struct GrowthCheck {
    bool pass = false;
    /// Smallest box-norm growth factor over sampled directions.
    double factor_u = 0.0;
    double factor_s = 0.0;
    /// factor - sqrt(rate), the strengthened growth bound.
    double margin_u = 0.0;
    double margin_s = 0.0;
};

/// Box-norm growth of cone vectors; requires factor > 1 and factor >= sqrt(m(Df|E^u(x))).
GrowthCheck cone_growth_check(const SystemSpec& g, const ConeFamily& cones, const Point& x, int n_dirs = 33);

/// Splitting of g from nested images of f's cones along g-orbits.
Splitting perturbed_splitting(const SystemSpec& g, const ConeFamily& cones, const Point& x, int n_iters = 30);

}  // namespace pwh
