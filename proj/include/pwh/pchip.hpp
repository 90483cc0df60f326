#pragma once

#include <cstddef>
#include <vector>

namespace pwh {

/// Fritsch-Carlson monotone cubic Hermite interpolant on increasing knots.
/// Monotone data stay monotone, so the interpolant of a monotone G can be inverted.
class Pchip {
public:
    Pchip() = default;
    Pchip(std::vector<double> x, std::vector<double> y);

    double operator()(double t) const;
    double derivative(double t) const;
    /// Value on segment i at t (no search).
    double eval_segment(std::size_t i, double t) const;
    double derivative_segment(std::size_t i, double t) const;
    /// Segment containing t (clamped to the knot range).
    std::size_t segment(double t) const;

    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return y_; }
    const std::vector<double>& slopes() const { return d_; }

private:
    std::vector<double> x_, y_, d_;
};

}  // namespace pwh
