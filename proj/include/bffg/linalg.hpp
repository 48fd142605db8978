#ifndef BFFG_LINALG_HPP
#define BFFG_LINALG_HPP

#include <string_view>

#include <Eigen/Dense>

namespace bffg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Cholesky factor of a symmetric positive definite matrix.
///
/// Fails over to a single retry with jitter 1e-10 * trace / d on the diagonal;
/// throws NumericalError if that also fails. `what` names the matrix in messages.
Matrix spd_cholesky(const Matrix& m, std::string_view what);

/// True when the matrix is square and symmetric within `tol` (relative to its max entry).
bool is_symmetric(const Matrix& m, double tol = 1e-12);

/// Square root L (L L' = m) of a symmetric positive semidefinite matrix; zero allowed.
Matrix psd_sqrt(const Matrix& m);

/// Log determinant of an SPD matrix from its Cholesky factor.
double log_det_from_cholesky(const Matrix& lower);

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool all_finite(const Matrix& m);

} // namespace bffg

#endif // BFFG_LINALG_HPP
