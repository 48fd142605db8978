#ifndef BFFG_ORACLE_HPP
#define BFFG_ORACLE_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "bffg/linalg.hpp"
#include "bffg/tree.hpp"

namespace bffg {

// Brute-force reference computations. Slow by design; used to cross-check the filters.

struct EnumerationResult {
    double likelihood = 0.0;
    /// Posterior marginal of every latent vertex (zero vectors if the likelihood is 0).
    std::vector<Vector> marginals;
    std::size_t configurations = 0;
};

/// Sums prior x transitions x observation probabilities over every latent configuration
/// of a finite-state tree. Throws UnsupportedError for non-finite kernels and
/// ValidationError if the number of configurations exceeds `max_configurations`.
EnumerationResult enumerate_likelihood(const TreeModel& model, std::size_t max_configurations = 10'000'000);

/// A one-dimensional transition density k(x, y) that is concentrated within
/// a few `sigma` of `mean(x)`.
struct KernelDensity1d {
    std::function<double(double, double)> density;
    std::function<double(double)> mean;
    double sigma = 1.0;
};

KernelDensity1d linear_gaussian_density_1d(double B, double beta, double gamma);

/// integral of k(x, y) h(y) dy at each x by adaptive Simpson on mean(x) +- 10 sigma.
/// Throws NumericalError when the requested absolute tolerance is not reached.
std::vector<double> quadrature_pullback_1d(const KernelDensity1d& kernel, const std::function<double(double)>& h,
                                           const std::vector<double>& xs, double tolerance = 1e-9);

/// Drift and diffusivity of a diffusion and of its auxiliary process at one point.
struct GeneratorCoefficients {
    Vector b;
    Matrix a;
    Vector b_tilde;
    Matrix a_tilde;
};

/// ((L - L_tilde) g)(x) / g(x) with the gradient and Hessian of g from central differences.
double generator_fd(const std::function<double(const Vector&)>& g, const GeneratorCoefficients& coefficients,
                    const Vector& x, double step);

} // namespace bffg

#endif // BFFG_ORACLE_HPP
