#include "pwh/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "pwh/errors.hpp"

namespace pwh {

double wrap_unit(double t) {
    double r = t - std::floor(t);
    // floor of a tiny negative number leaves 1 - 2^-53 rounded up to 1.
    if (r >= 1.0) r = 0.0;
    return r;
}

double wrap_centered(double t) { return t - std::nearbyint(t); }

Mat2 Mat2::inverse() const {
    const double d = det();
    return {a22 / d, -a12 / d, -a21 / d, a11 / d};
}

namespace {

// Singular values of a 2x2 matrix from the invariants of A^T A.
void singular_values(const Mat2& m, double& smax, double& smin) {
    const double p = m.a11 * m.a11 + m.a12 * m.a12 + m.a21 * m.a21 + m.a22 * m.a22;
    const double d = std::abs(m.det());
    const double disc = std::sqrt(std::max(0.0, p * p - 4.0 * d * d));
    smax = std::sqrt(0.5 * (p + disc));
    smin = smax > 0.0 ? d / smax : 0.0;
}

}  // namespace

double Mat2::op_norm() const {
    double smax = 0.0, smin = 0.0;
    singular_values(*this, smax, smin);
    return smax;
}

double Mat2::min_norm() const {
    double smax = 0.0, smin = 0.0;
    singular_values(*this, smax, smin);
    return smin;
}

double Mat2::max_abs_entry() const {
    return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
}

TangentVector displacement(const Point& p, const Point& q) {
    return {wrap_centered(q.u - p.u), wrap_centered(q.v - p.v)};
}

double torus_dist(const Point& p, const Point& q) { return displacement(p, q).norm(); }

Point exp_map(const Point& x, const TangentVector& w) {
    const double n = w.norm();
    if (!(n < kRho)) fail(ErrorCode::NormExceedsInjectivityRadius, "|w| = " + std::to_string(n));
    return Point(x.u + w.a, x.v + w.b);
}

TangentVector log_map(const Point& x, const Point& y) {
    const TangentVector w = displacement(x, y);
    if (!(w.norm() < kRho)) fail(ErrorCode::PointsTooFar, to_string(x) + " -> " + to_string(y));
    return w;
}

double boundary_dist_or_zero(const Point& x, const DomainDescriptor& domain) {
    if (domain.is_full()) return 1.0;
    double best = std::numeric_limits<double>::infinity();
    for (const Point& p : domain.excluded_points) best = std::min(best, torus_dist(x, p));
    return best;
}

double boundary_dist(const Point& x, const DomainDescriptor& domain) {
    const double d = boundary_dist_or_zero(x, domain);
    if (d <= 0.0) fail(ErrorCode::PointOnBoundary, to_string(x));
    return d;
}

std::string to_string(const Point& p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "(%.17g, %.17g)", p.u, p.v);
    return buf;
}

}  // namespace pwh
