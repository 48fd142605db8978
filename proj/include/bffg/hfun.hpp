#ifndef BFFG_HFUN_HPP
#define BFFG_HFUN_HPP

#include <cstddef>
#include <variant>

#include "bffg/linalg.hpp"
#include "bffg/observation.hpp"

namespace bffg {

/// h on a finite state space, stored as exp(log_scale) * values.
///
/// After normalize() the largest entry of `values` is 1 (or the vector is all zero,
/// which represents the zero function: an impossible observation set).
struct FiniteH {
    Vector values;
    double log_scale = 0.0;

    static FiniteH ones(std::size_t n);
    /// Normalized representation of the given (nonnegative) function values.
    static FiniteH from_values(const Vector& v, double log_scale = 0.0);

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
    bool is_zero() const { return !(values.array() > 0.0).any(); }
    double operator()(std::size_t x) const;
    double log_at(std::size_t x) const;
    Vector represented() const;
    void normalize();
};

/// x -> exp(-c + F'x - x'Hx / 2).
struct GaussianTriplet {
    double c = 0.0;
    Vector F;
    Matrix H;

    /// The constant function 1 on R^d.
    static GaussianTriplet ones(std::size_t d);

    std::size_t dim() const { return static_cast<std::size_t>(F.size()); }
    double log_at(const Vector& x) const;
    double operator()(const Vector& x) const;
    /// Gradient of log g at x, F - H x.
    Vector score(const Vector& x) const { return F - H * x; }
};

using HFun = std::variant<FiniteH, GaussianTriplet>;

FiniteH fuse(const FiniteH& a, const FiniteH& b);
GaussianTriplet fuse(const GaussianTriplet& a, const GaussianTriplet& b);
/// Fusion of the contributions of two children: Hadamard product or triplet sum.
HFun fuse(const HFun& a, const HFun& b);

/// h(x) = p(v | x) for a single observation.
HFun from_observation(const ObservationKernel& kernel, const ObservationValue& value);
FiniteH from_observation(const FiniteObservation& kernel, std::size_t label);
GaussianTriplet from_observation(const GaussianObservation& kernel, const Vector& value);

/// The Gaussian N(mean, S S') multiplied by a triplet function g.
///
/// log_mass = log of the integral of N(y; mean, S S') g(y) dy. The normalized product
/// is again Gaussian, described by `mean` and `cov` (with `cov_sqrt` a square root).
struct GaussianTilt {
    double log_mass = 0.0;
    Vector mean;
    Matrix cov_sqrt;

    Matrix cov() const { return cov_sqrt * cov_sqrt.transpose(); }
};

/// Tilts N(mean, S S') by g. `cov_sqrt` may be rank deficient (zero gives a point mass).
/// Throws NumericalError when the product is not normalizable.
GaussianTilt tilt(const Vector& mean, const Matrix& cov_sqrt, const GaussianTriplet& g);

/// log of the integral of N(y; mean, S S') g(y) dy, without forming the tilted law.
double log_expectation(const Vector& mean, const Matrix& cov_sqrt, const GaussianTriplet& g);

/// Triplet of x -> log integral of N(y; Bx + beta, S S') g(y) dy (Gaussian pullback).
GaussianTriplet gaussian_pullback(const Matrix& B, const Vector& beta, const Matrix& cov_sqrt,
                                  const GaussianTriplet& g);

} // namespace bffg

#endif // BFFG_HFUN_HPP
