#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "poly_jet.hpp"

namespace loewner {

inline double spectral_norm(const Matrix& A) {
    if (A.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
}

/// Induced max-norm: largest absolute row sum.
inline double max_row_sum(const Matrix& A) {
    if (A.size() == 0) return 0.0;
    return A.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double max_abs(const Eigen::VectorXcd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
inline double max_abs(const Matrix& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

inline double spectral_radius(const Matrix& A) {
    if (A.size() == 0) return 0.0;
    return Eigen::ComplexEigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

inline Matrix matrix_exp(const Matrix& A) { return A.exp(); }

} // namespace loewner
