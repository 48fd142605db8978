#ifndef BFFG_OBSERVATION_HPP
#define BFFG_OBSERVATION_HPP

#include <cstddef>
#include <variant>

#include "bffg/linalg.hpp"

namespace bffg {

/// Finite observation kernel: lambda(x, v) = p(v | x), one row per latent state.
class FiniteObservation {
public:
    explicit FiniteObservation(Matrix lambda);

    const Matrix& lambda() const { return lambda_; }
    std::size_t states() const { return static_cast<std::size_t>(lambda_.rows()); }
    std::size_t labels() const { return static_cast<std::size_t>(lambda_.cols()); }

private:
    Matrix lambda_;
};

/// Gaussian observation v | x ~ N(L x, Sigma).
class GaussianObservation {
public:
    GaussianObservation(Matrix L, Matrix Sigma);

    const Matrix& L() const { return L_; }
    const Matrix& Sigma() const { return Sigma_; }
    const Matrix& Sigma_cholesky() const { return Sigma_chol_; }
    std::size_t state_dim() const { return static_cast<std::size_t>(L_.cols()); }
    std::size_t obs_dim() const { return static_cast<std::size_t>(L_.rows()); }

private:
    Matrix L_;
    Matrix Sigma_;
    Matrix Sigma_chol_;
};

using ObservationKernel = std::variant<FiniteObservation, GaussianObservation>;

/// A discrete label or a real vector, matching the observation kernel kind.
using ObservationValue = std::variant<std::size_t, Vector>;

} // namespace bffg

#endif // BFFG_OBSERVATION_HPP
