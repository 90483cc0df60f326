#include "pwh/systems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "pwh/errors.hpp"

namespace pwh {

SystemSpec::SystemSpec(std::shared_ptr<const SystemModel> model, DomainDescriptor domain,
                       double holder_alpha, std::string name)
    : model_(std::move(model)), domain_(std::move(domain)), holder_alpha_(holder_alpha),
      name_(std::move(name)) {
    for (const Point& p : domain_.excluded_points) {
        bool mapped_into_set = false;
        const Point fp = model_->forward(p);
        for (const Point& q : domain_.excluded_points) mapped_into_set |= torus_dist(fp, q) < 1e-12;
        if (!mapped_into_set) fail(ErrorCode::InvariantViolation, "excluded set not invariant at " + to_string(p));
    }
}

namespace {

class InverseModel final : public SystemModel {
public:
    explicit InverseModel(SystemSpec base) : base_(std::move(base)) {}
    Point forward(const Point& x) const override { return base_.backward(x); }
    Point backward(const Point& y) const override { return base_.forward(y); }
    MapStep forward_step(const Point& x) const override { return base_.backward_step(x); }
    MapStep backward_step(const Point& y) const override { return base_.forward_step(y); }
    std::optional<BumpSupport> support() const override { return base_.perturbation_support(); }

private:
    SystemSpec base_;
};

constexpr Mat2 kCat{2.0, 1.0, 1.0, 1.0};
constexpr Mat2 kCatInv{1.0, -1.0, -1.0, 2.0};

Point cat_forward(const Point& x) { return Point(2.0 * x.u + x.v, x.u + x.v); }
Point cat_backward(const Point& y) { return Point(y.u - y.v, 2.0 * y.v - y.u); }

class CatModel final : public SystemModel {
public:
    Point forward(const Point& x) const override { return cat_forward(x); }
    Point backward(const Point& y) const override { return cat_backward(y); }
    MapStep forward_step(const Point& x) const override { return {cat_forward(x), kCat}; }
    MapStep backward_step(const Point& y) const override { return {cat_backward(y), kCatInv}; }
};

}  // namespace

SystemSpec SystemSpec::inverse() const {
    return SystemSpec(std::make_shared<InverseModel>(*this), domain_, holder_alpha_, name_ + "^-1");
}

const CatEigen& cat_eigen() {
    static const CatEigen eig = [] {
        const double s5 = std::sqrt(5.0);
        CatEigen e{};
        e.lambda_u = 0.5 * (3.0 + s5);
        e.lambda_s = 0.5 * (3.0 - s5);
        e.e_u = TangentVector{1.0, e.lambda_u - 2.0}.normalized();
        e.e_s = TangentVector{-e.e_u.b, e.e_u.a};
        return e;
    }();
    return eig;
}

SystemSpec build_cat_map() {
    return SystemSpec(std::make_shared<CatModel>(), DomainDescriptor::full(), 1.0, "cat");
}

double SlowProfile::value(double s) const {
    const double t = s / (radius * radius);
    if (t >= 1.0) return 1.0;
    const double h = 0.5 * exponent;
    if (t <= blend_start) {
        if (t <= 0.0) return 0.0;
        if (h == 0.25) return std::sqrt(std::sqrt(t));
        if (h == 0.5) return std::sqrt(t);
        return std::pow(t, h);
    }
    // Cubic Hermite from (blend_start, t^h) with matching slope to (1, 1) with zero slope.
    const double w = 1.0 - blend_start;
    const double p0 = std::pow(blend_start, h);
    const double m0 = h * p0 / blend_start * w;
    const double z = (t - blend_start) / w;
    const double z2 = z * z, z3 = z2 * z;
    return (2 * z3 - 3 * z2 + 1) * p0 + (z3 - 2 * z2 + z) * m0 + (-2 * z3 + 3 * z2);
}

double SlowProfile::derivative(double s) const {
    const double r2 = radius * radius;
    const double t = s / r2;
    if (t >= 1.0 || t <= 0.0) return 0.0;
    const double h = 0.5 * exponent;
    if (t <= blend_start) return value(s) * h / s;
    const double w = 1.0 - blend_start;
    const double p0 = std::pow(blend_start, h);
    const double m0 = h * p0 / blend_start * w;
    const double z = (t - blend_start) / w;
    const double z2 = z * z;
    const double dz = (6 * z2 - 6 * z) * p0 + (3 * z2 - 4 * z + 1) * m0 + (-6 * z2 + 6 * z);
    return dz / w / r2;
}

double max_slow_radius() { return 0.5 * cat_eigen().lambda_s; }

namespace {

// The slowed flow lives in eigencoordinates p = P^T w where the columns of P are
// (e_u, e_s) and w is the lift of x nearest the origin. Outside the slow disk the
// flow is p' = L p with L = diag(c, -c), c = log lambda_u, whose time-1 map is A.
class SlowdownModel final : public SystemModel {
public:
    SlowdownModel(double radius, double exponent, SlowdownOptions opts)
        : profile_{radius, exponent, opts.blend_start}, c_(std::log(cat_eigen().lambda_u)),
          steps_(static_cast<int>(std::lround(1.0 / opts.step))), h_(1.0 / steps_) {
        const CatEigen& e = cat_eigen();
        P_ = Mat2::from_columns(e.e_u, e.e_s);
        Pt_ = P_.transpose();
    }

    Point forward(const Point& x) const override { return flow(x, +1.0); }
    Point backward(const Point& y) const override { return flow(y, -1.0); }
    MapStep forward_step(const Point& x) const override { return flow_with_jacobian(x, +1.0); }
    MapStep backward_step(const Point& y) const override { return flow_with_jacobian(y, -1.0); }

private:
    struct Eig {
        double p1, p2;
    };

    Eig to_eig(const Point& x) const {
        const TangentVector w{wrap_centered(x.u), wrap_centered(x.v)};
        const TangentVector p = Pt_ * w;
        return {p.a, p.b};
    }

    Point from_eig(const Eig& p) const {
        const TangentVector w = P_ * TangentVector{p.p1, p.p2};
        return Point(w.a, w.b);
    }

    // Does the unslowed trajectory over [0,1] come within the slow radius?
    bool enters(const Eig& p, double sign) const {
        const double r2 = profile_.radius * profile_.radius;
        const double a = p.p1 * p.p1, b = p.p2 * p.p2;
        const double k = sign * c_;
        auto s_at = [&](double t) { return a * std::exp(2 * k * t) + b * std::exp(-2 * k * t); };
        double smin = std::min(a + b, s_at(1.0));
        if (a > 0.0 && b > 0.0) {
            const double tstar = std::log(b / a) / (4.0 * k);
            if (tstar > 0.0 && tstar < 1.0) smin = std::min(smin, s_at(tstar));
        }
        return smin < r2;
    }

    void rhs(double q1, double q2, double k, double& d1, double& d2) const {
        const double psi = profile_.value(q1 * q1 + q2 * q2);
        d1 = k * psi * q1;
        d2 = -k * psi * q2;
    }

    // Flow field and its derivative at q; k = +-c.
    void rhs_jac(double q1, double q2, double k, double& d1, double& d2, Mat2& dv) const {
        const double s = q1 * q1 + q2 * q2;
        const double psi = profile_.value(s);
        const double dpsi = s > 0.0 ? profile_.derivative(s) : 0.0;
        const double l1 = k * q1, l2 = -k * q2;
        d1 = psi * l1;
        d2 = psi * l2;
        dv = {k * psi + 2 * dpsi * l1 * q1, 2 * dpsi * l1 * q2,
              2 * dpsi * l2 * q1, -k * psi + 2 * dpsi * l2 * q2};
    }

    Point flow(const Point& x, double sign) const {
        const Eig p = to_eig(x);
        if (!enters(p, sign)) return sign > 0 ? cat_forward(x) : cat_backward(x);
        const double k = sign * c_;
        double q1 = p.p1, q2 = p.p2;
        for (int i = 0; i < steps_; ++i) {
            double k11, k12, k21, k22, k31, k32, k41, k42;
            rhs(q1, q2, k, k11, k12);
            rhs(q1 + 0.5 * h_ * k11, q2 + 0.5 * h_ * k12, k, k21, k22);
            rhs(q1 + 0.5 * h_ * k21, q2 + 0.5 * h_ * k22, k, k31, k32);
            rhs(q1 + h_ * k31, q2 + h_ * k32, k, k41, k42);
            q1 += h_ / 6.0 * (k11 + 2 * k21 + 2 * k31 + k41);
            q2 += h_ / 6.0 * (k12 + 2 * k22 + 2 * k32 + k42);
        }
        if (!std::isfinite(q1) || !std::isfinite(q2)) fail(ErrorCode::IntegrationFailure, to_string(x));
        return from_eig({q1, q2});
    }

    MapStep flow_with_jacobian(const Point& x, double sign) const {
        const Eig p = to_eig(x);
        if (!enters(p, sign)) {
            return sign > 0 ? MapStep{cat_forward(x), kCat} : MapStep{cat_backward(x), kCatInv};
        }
        const double k = sign * c_;
        double q1 = p.p1, q2 = p.p2;
        Mat2 J = Mat2::identity();
        for (int i = 0; i < steps_; ++i) {
            double a1, a2, b1, b2, c1, c2, d1, d2;
            Mat2 da, db, dc, dd;
            rhs_jac(q1, q2, k, a1, a2, da);
            const Mat2 ja = da * J;
            rhs_jac(q1 + 0.5 * h_ * a1, q2 + 0.5 * h_ * a2, k, b1, b2, db);
            const Mat2 jb = db * (J + (0.5 * h_) * ja);
            rhs_jac(q1 + 0.5 * h_ * b1, q2 + 0.5 * h_ * b2, k, c1, c2, dc);
            const Mat2 jc = dc * (J + (0.5 * h_) * jb);
            rhs_jac(q1 + h_ * c1, q2 + h_ * c2, k, d1, d2, dd);
            const Mat2 jd = dd * (J + h_ * jc);
            q1 += h_ / 6.0 * (a1 + 2 * b1 + 2 * c1 + d1);
            q2 += h_ / 6.0 * (a2 + 2 * b2 + 2 * c2 + d2);
            J = J + (h_ / 6.0) * (ja + 2.0 * jb + 2.0 * jc + jd);
        }
        if (!std::isfinite(q1) || !std::isfinite(q2) || !std::isfinite(J.a11 + J.a12 + J.a21 + J.a22)) {
            fail(ErrorCode::IntegrationFailure, to_string(x));
        }
        return {from_eig({q1, q2}), P_ * J * Pt_};
    }

    SlowProfile profile_;
    double c_;
    int steps_;
    double h_;
    Mat2 P_, Pt_;
};

}  // namespace

SystemSpec build_slowdown_map(double slow_radius, double slow_exponent, SlowdownOptions opts) {
    if (!(slow_radius > 0.0 && slow_radius < max_slow_radius())) {
        fail(ErrorCode::ConfigError, "slow_radius must lie in (0, " + std::to_string(max_slow_radius()) + ")");
    }
    if (!(slow_exponent > 0.0)) fail(ErrorCode::ConfigError, "slow_exponent must be positive");
    if (!(opts.step > 0.0 && opts.step <= 0.1)) fail(ErrorCode::ConfigError, "integration step out of range");
    if (!(opts.blend_start > 0.0 && opts.blend_start < 1.0)) fail(ErrorCode::ConfigError, "blend_start out of range");
    return SystemSpec(std::make_shared<SlowdownModel>(slow_radius, slow_exponent, opts),
                      DomainDescriptor::complement_of({Point(0.0, 0.0)}), std::min(1.0, slow_exponent),
                      "slowdown");
}

}  // namespace pwh
