#pragma once

// Independent references used by the unit tests and the acceptance binary.

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pwh/geometry.hpp"
#include "pwh/shadowing.hpp"

namespace oracle {

inline Eigen::Matrix2d cat_matrix() {
    Eigen::Matrix2d a;
    a << 2.0, 1.0, 1.0, 1.0;
    return a;
}

/// Eigenpairs of the cat matrix from Eigen's symmetric solver, unstable first.
struct CatEigenpairs {
    double lambda_u, lambda_s;
    Eigen::Vector2d e_u, e_s;
};

inline CatEigenpairs cat_eigenpairs() {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cat_matrix());
    // Eigenvalues come sorted ascending.
    return {es.eigenvalues()(1), es.eigenvalues()(0), es.eigenvectors().col(1), es.eigenvectors().col(0)};
}

/// Shadow of a cat-map pseudo orbit from one sparse solve in standard coordinates:
/// c_{n+1} - A c_n = -(x_{n+1} - f(x_n)), e_s . c_{-K} = 0, e_u . c_K = 0.
inline pwh::Point sparse_linear_shadow(const pwh::PseudoOrbit& po) {
    const int K = po.K;
    const int n_pts = 2 * K + 1;
    const Eigen::Matrix2d a = cat_matrix();
    const CatEigenpairs ep = cat_eigenpairs();
    std::vector<Eigen::Triplet<double>> t;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n_pts);
    t.emplace_back(0, 0, ep.e_s(0));
    t.emplace_back(0, 1, ep.e_s(1));
    for (int i = 0; i + 1 < n_pts; ++i) {
        const pwh::Point& x = po.points[static_cast<std::size_t>(i)];
        const pwh::Point& next = po.points[static_cast<std::size_t>(i + 1)];
        const Eigen::Vector2d fx = a * Eigen::Vector2d(x.u, x.v);
        const pwh::TangentVector kick = pwh::displacement(pwh::Point{fx(0), fx(1)}, next);
        for (int r = 0; r < 2; ++r) {
            const int row = 1 + 2 * i + r;
            t.emplace_back(row, 2 * (i + 1) + r, 1.0);
            t.emplace_back(row, 2 * i, -a(r, 0));
            t.emplace_back(row, 2 * i + 1, -a(r, 1));
            rhs(row) = -(r == 0 ? kick.a : kick.b);
        }
    }
    t.emplace_back(2 * n_pts - 1, 2 * (n_pts - 1), ep.e_u(0));
    t.emplace_back(2 * n_pts - 1, 2 * (n_pts - 1) + 1, ep.e_u(1));
    Eigen::SparseMatrix<double> m(2 * n_pts, 2 * n_pts);
    m.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(m);
    const Eigen::VectorXd c = lu.solve(rhs);
    return pwh::exp_map(po.at(0), pwh::TangentVector{c(2 * K), c(2 * K + 1)});
}

}  // namespace oracle
