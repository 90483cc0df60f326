#pragma once

#include <memory>
#include <optional>
#include <string>

#include "pwh/geometry.hpp"

namespace pwh {

/// Image of a point together with the derivative of the map at that point.
struct MapStep {
    Point image;
    Mat2 jacobian;
};

/// Closed disk where a perturbation differs from its base map.
struct BumpSupport {
    Point center;
    double radius = 0.0;
};

/// Dynamics behind a SystemSpec. `backward_step(y)` returns f^{-1}(y) and the
/// derivative of f^{-1} at y, so that backward_step(f(x)).jacobian * Df(x) = I.
class SystemModel {
public:
    virtual ~SystemModel() = default;
    virtual Point forward(const Point& x) const = 0;
    virtual Point backward(const Point& y) const = 0;
    virtual MapStep forward_step(const Point& x) const = 0;
    virtual MapStep backward_step(const Point& y) const = 0;
    virtual std::optional<BumpSupport> support() const { return std::nullopt; }
};

/// Immutable handle to a torus diffeomorphism and its invariant open set N.
/// Copies share the underlying model.
class SystemSpec {
public:
    SystemSpec(std::shared_ptr<const SystemModel> model, DomainDescriptor domain, double holder_alpha,
               std::string name);

    Point forward(const Point& x) const { return model_->forward(x); }
    Point backward(const Point& y) const { return model_->backward(y); }
    Mat2 jacobian(const Point& x) const { return model_->forward_step(x).jacobian; }
    Mat2 jacobian_inv(const Point& y) const { return model_->backward_step(y).jacobian; }
    MapStep forward_step(const Point& x) const { return model_->forward_step(x); }
    MapStep backward_step(const Point& y) const { return model_->backward_step(y); }

    const DomainDescriptor& domain() const { return domain_; }
    double holder_alpha() const { return holder_alpha_; }
    const std::string& name() const { return name_; }
    std::optional<BumpSupport> perturbation_support() const { return model_->support(); }

    /// The same system with time reversed. Stable objects of f are unstable objects of the inverse.
    SystemSpec inverse() const;

private:
    std::shared_ptr<const SystemModel> model_;
    DomainDescriptor domain_;
    double holder_alpha_;
    std::string name_;
};

/// Eigen-data of A = [[2,1],[1,1]].
struct CatEigen {
    double lambda_u;
    double lambda_s;
    TangentVector e_u;
    TangentVector e_s;
};
const CatEigen& cat_eigen();

SystemSpec build_cat_map();

struct SlowdownOptions {
    double step = 1e-3;
    /// Smoothing band of the profile, as fractions of slow_radius^2.
    double blend_start = 0.9;
};

/// Cat map slowed near the fixed point (0,0). Requires slow_radius < lambda_s / 2 so that
/// orbits through the fundamental domain never meet the slowed disks of other lattice points.
SystemSpec build_slowdown_map(double slow_radius, double slow_exponent, SlowdownOptions opts = {});

/// Largest slow radius accepted by build_slowdown_map.
double max_slow_radius();

/// The slowdown profile psi(s) and its derivative in s (exposed for tests).
struct SlowProfile {
    double radius;
    double exponent;
    double blend_start = 0.9;
    double value(double s) const;
    double derivative(double s) const;
};

}  // namespace pwh
