#pragma once

// Spectral functions of symmetric matrices, backed by Eigen's self-adjoint solver.

#include <Eigen/Dense>

#include <cmath>

namespace grdd::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Views a flat row-major payload of length m*m as a matrix.
inline Matrix as_matrix(const Vector& flat, Eigen::Index m) {
    return Eigen::Map<const RowMajorMatrix>(flat.data(), m, m);
}

inline Vector flatten(const Matrix& a) {
    RowMajorMatrix rm = a;
    return Eigen::Map<const Vector>(rm.data(), rm.size());
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// U f(Λ) Uᵀ for symmetric `a`.
template <class F>
Matrix spectral_apply(const Matrix& a, F&& f) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
    Vector lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = f(lam(i));
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

inline Matrix log_spd(const Matrix& a) {
    return spectral_apply(a, [](double x) { return std::log(x); });
}

inline Matrix exp_sym(const Matrix& a) {
    return spectral_apply(a, [](double x) { return std::exp(x); });
}

inline Matrix pow_spd(const Matrix& a, double p) {
    return spectral_apply(a, [p](double x) { return std::pow(x, p); });
}

/// Eigenvalues of the symmetric part, ascending.
inline Vector sym_eigenvalues(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double asymmetry(const Matrix& a) { return (a - a.transpose()).cwiseAbs().maxCoeff(); }

/// Frobenius-nearest symmetric matrix with every eigenvalue >= floor.
inline Matrix eigen_floor(const Matrix& a, double floor) {
    return spectral_apply(a, [floor](double x) { return x < floor ? floor : x; });
}

} // namespace grdd::linalg
