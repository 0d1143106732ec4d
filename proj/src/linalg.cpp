#include "considerkf/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace ckf {

double min_eigenvalue(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("min_eigenvalue: matrix is not square");
    }
    if (a.rows() == 0) {
        return 0.0;
    }
    if (a.rows() == 1) {
        return a(0, 0);
    }
    if (a.rows() == 2) {
        // Closed form for the symmetric part.
        const double mean = 0.5 * (a(0, 0) + a(1, 1));
        const double off = 0.5 * (a(0, 1) + a(1, 0));
        const double half_gap = 0.5 * (a(0, 0) - a(1, 1));
        return mean - std::sqrt(half_gap * half_gap + off * off);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a),
                                             Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Matrix psd_sqrt(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("psd_sqrt: matrix is not square");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
    const Vector clamped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clamped.cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

Matrix chol_factor(const Matrix& a, const char* label) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw SingularMatrixError(std::string(label) +
                                  " is not positive definite");
    }
    return llt.matrixL();
}

void require_spd(const Matrix& a, const char* label) {
    const double floor = 1e-12 * a.trace();
    if (!(min_eigenvalue(a) > floor)) {
        throw SingularMatrixError(std::string(label) +
                                  " is singular or indefinite");
    }
}

double rel_deviation(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("rel_deviation: shape mismatch");
    }
    const double scale =
        std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-30});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

} // namespace ckf
