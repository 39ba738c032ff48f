#pragma once

#include "sfda/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace sfda::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenpairs of a symmetric matrix in descending eigenvalue order.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};

inline SymmetricEigen eigen_descending(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success)
        throw DegenerateError("eigen_failure", "symmetric eigendecomposition failed");
    return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

/// M^power for symmetric PSD M; eigenvalues below `floor * max` are clamped to
/// that floor before the power is applied.
inline Matrix sym_power(const Matrix& m, double power, double floor = 1e-12) {
    const auto eig = eigen_descending(m);
    const double top = std::max(eig.values.maxCoeff(), 0.0);
    const double cut = top > 0 ? floor * top : floor;
    Vector d = eig.values.unaryExpr([&](double v) { return std::pow(std::max(v, cut), power); });
    return eig.vectors * d.asDiagonal() * eig.vectors.transpose();
}

/// Cosine of the angle between two vectors; zero if either vanishes.
inline double cosine(const Vector& a, const Vector& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

inline double abs_cosine(const Vector& a, const Vector& b) { return std::abs(cosine(a, b)); }

/// Entries whose magnitude exceeds rel_tol times the largest magnitude.
inline Eigen::Index support_size(const Vector& v, double rel_tol = 1e-10) {
    const double top = v.cwiseAbs().maxCoeff();
    if (top == 0.0) return 0;
    return (v.array().abs() > rel_tol * top).count();
}

/// Flips v so its largest-magnitude entry (first on ties) is positive.
inline void fix_sign(Vector& v) {
    if (v.size() == 0) return;
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0) v = -v;
}

/// Numerical rank of the rows of `m` via a rank-revealing QR.
inline Eigen::Index row_rank(const Matrix& m, double rel_tol = 1e-10) {
    if (m.rows() == 0) return 0;
    Eigen::ColPivHouseholderQR<Matrix> qr(m.transpose());
    qr.setThreshold(rel_tol);
    return qr.rank();
}

/// Orthogonal projector onto span of the rows of `rows`.
inline Matrix row_space_projector(const Matrix& rows) {
    const auto p = rows.cols();
    if (rows.rows() == 0) return Matrix::Zero(p, p);
    Eigen::HouseholderQR<Matrix> qr(rows.transpose());
    const Matrix q = qr.householderQ() * Matrix::Identity(p, rows.rows());
    return q * q.transpose();
}

/// Spectral (operator) norm of a symmetric matrix.
inline double sym_operator_norm(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace sfda::linalg
