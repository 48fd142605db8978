#include "bffg/linalg.hpp"

#include <cmath>
#include <string>

#include "bffg/errors.hpp"

namespace bffg {

bool is_symmetric(const Matrix& m, double tol)
{
    if (m.rows() != m.cols())
        return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool all_finite(const Matrix& m)
{
    return m.allFinite();
}

Matrix spd_cholesky(const Matrix& m, std::string_view what)
{
    if (m.rows() != m.cols())
        throw DimensionError(std::string(what) + ": matrix is not square");
    if (!m.allFinite())
        throw NumericalError(std::string(what) + ": non-finite entries");
    if (!is_symmetric(m, 1e-10))
        throw NumericalError(std::string(what) + ": matrix is not symmetric");
    const Matrix sym = symmetrized(m);
    Eigen::LLT<Matrix> llt(sym);
    if (llt.info() == Eigen::Success)
        return llt.matrixL();
    const auto d = static_cast<double>(sym.rows());
    const double jitter = 1e-10 * std::abs(sym.trace()) / d;
    Matrix jittered = sym;
    jittered.diagonal().array() += jitter;
    llt.compute(jittered);
    if (llt.info() != Eigen::Success || jitter == 0.0)
        throw NumericalError(std::string(what) + ": not positive definite (Cholesky failed after jitter)");
    return llt.matrixL();
}

Matrix psd_sqrt(const Matrix& m)
{
    if (m.rows() != m.cols())
        throw DimensionError("psd_sqrt: matrix is not square");
    if (m.isZero(0.0))
        return Matrix::Zero(m.rows(), m.cols());
    Eigen::LLT<Matrix> llt(symmetrized(m));
    if (llt.info() == Eigen::Success)
        return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(m));
    const double tol = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -tol)
        throw NumericalError("psd_sqrt: matrix has a negative eigenvalue");
    const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal();
}

double log_det_from_cholesky(const Matrix& lower)
{
    return 2.0 * lower.diagonal().array().log().sum();
}

} // namespace bffg
