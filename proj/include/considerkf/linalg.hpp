// Small dense-matrix helpers used throughout the filters and the simulator.
#pragma once

#include <Eigen/Dense>

#include "considerkf/errors.hpp"

namespace ckf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// (A + Aᵀ)/2, wiping out floating-point asymmetry drift.
inline Matrix symmetrize(const Matrix& a) {
    return 0.5 * (a + a.transpose());
}

/// Largest |a_ij − a_ji|.
inline double max_asymmetry(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("max_asymmetry: matrix is not square");
    }
    return (a - a.transpose()).cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& a);

/// Symmetric PSD square root; eigenvalues below zero are clamped.
/// Works for singular inputs (e.g. a zero process-noise covariance).
Matrix psd_sqrt(const Matrix& a);

/// Lower Cholesky factor of a positive definite matrix.
/// Throws SingularMatrixError (mentioning `label`) when the
/// factorization fails.
Matrix chol_factor(const Matrix& a, const char* label);

/// Throws SingularMatrixError unless min eigenvalue > 1e-12 * trace.
void require_spd(const Matrix& a, const char* label);

/// max |a−b| / max(max|a|, max|b|, 1e-30); stable near zero.
double rel_deviation(const Matrix& a, const Matrix& b);

} // namespace ckf
