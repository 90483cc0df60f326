#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace pwh {

/// Injectivity radius of the unit flat torus.
inline constexpr double kRho = 0.5;

/// Reduce a real number into [0, 1).
double wrap_unit(double t);

/// Representative of t modulo 1 closest to zero, in [-0.5, 0.5].
double wrap_centered(double t);

/// A point of the unit flat torus. Coordinates are reduced on construction.
struct Point {
    double u = 0.0;
    double v = 0.0;

    Point() = default;
    Point(double u_, double v_) : u(wrap_unit(u_)), v(wrap_unit(v_)) {}

    friend bool operator==(const Point&, const Point&) = default;
};

struct TangentVector {
    double a = 0.0;
    double b = 0.0;

    double norm() const { return std::hypot(a, b); }
    double dot(const TangentVector& o) const { return a * o.a + b * o.b; }
    /// z-component of the planar cross product.
    double cross(const TangentVector& o) const { return a * o.b - b * o.a; }
    TangentVector normalized() const {
        const double n = norm();
        return {a / n, b / n};
    }

    friend TangentVector operator+(TangentVector x, TangentVector y) { return {x.a + y.a, x.b + y.b}; }
    friend TangentVector operator-(TangentVector x, TangentVector y) { return {x.a - y.a, x.b - y.b}; }
    friend TangentVector operator-(TangentVector x) { return {-x.a, -x.b}; }
    friend TangentVector operator*(double s, TangentVector x) { return {s * x.a, s * x.b}; }
    friend bool operator==(const TangentVector&, const TangentVector&) = default;
};

/// Row-major 2x2 matrix.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    /// Matrix whose columns are c1 and c2.
    static Mat2 from_columns(TangentVector c1, TangentVector c2) { return {c1.a, c2.a, c1.b, c2.b}; }

    double det() const { return a11 * a22 - a12 * a21; }
    Mat2 transpose() const { return {a11, a21, a12, a22}; }
    Mat2 inverse() const;
    /// Largest singular value.
    double op_norm() const;
    /// Smallest singular value (the co-norm m(A)).
    double min_norm() const;
    double max_abs_entry() const;

    TangentVector operator*(TangentVector x) const { return {a11 * x.a + a12 * x.b, a21 * x.a + a22 * x.b}; }
    Mat2 operator*(const Mat2& o) const {
        return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
                a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
    }
    friend Mat2 operator+(const Mat2& x, const Mat2& y) {
        return {x.a11 + y.a11, x.a12 + y.a12, x.a21 + y.a21, x.a22 + y.a22};
    }
    friend Mat2 operator-(const Mat2& x, const Mat2& y) {
        return {x.a11 - y.a11, x.a12 - y.a12, x.a21 - y.a21, x.a22 - y.a22};
    }
    friend Mat2 operator*(double s, const Mat2& x) { return {s * x.a11, s * x.a12, s * x.a21, s * x.a22}; }
    friend bool operator==(const Mat2&, const Mat2&) = default;
};

enum class DomainKind { FullManifold, ComplementOfFinitePointSet };

struct DomainDescriptor {
    DomainKind kind = DomainKind::FullManifold;
    std::vector<Point> excluded_points;

    static DomainDescriptor full() { return {}; }
    static DomainDescriptor complement_of(std::vector<Point> points) {
        return {DomainKind::ComplementOfFinitePointSet, std::move(points)};
    }
    bool is_full() const { return kind == DomainKind::FullManifold || excluded_points.empty(); }
};

double torus_dist(const Point& p, const Point& q);

/// Shortest displacement from p to q (componentwise centered wrap).
TangentVector displacement(const Point& p, const Point& q);

/// Translation by w. Throws NormExceedsInjectivityRadius when |w| >= rho.
Point exp_map(const Point& x, const TangentVector& w);

/// Inverse of exp_map. Throws PointsTooFar when d(x, y) >= rho.
TangentVector log_map(const Point& x, const Point& y);

/// Distance to the excluded set; 1 for the full torus. Throws PointOnBoundary.
double boundary_dist(const Point& x, const DomainDescriptor& domain);

/// Same as boundary_dist but returns 0 instead of throwing on excluded points.
double boundary_dist_or_zero(const Point& x, const DomainDescriptor& domain);

std::string to_string(const Point& p);

}  // namespace pwh
