#ifndef BFFG_KERNEL_HPP
#define BFFG_KERNEL_HPP

#include <cstddef>
#include <functional>
#include <variant>

#include "bffg/hfun.hpp"
#include "bffg/linalg.hpp"

namespace bffg {

/// Transition matrix K(x, y) on finite state spaces.
///
/// Markov kernels have rows summing to one. Backward kernels used only for filtering
/// may be non-Markov (`markov = false`), in which case only nonnegativity is enforced.
class FiniteKernel {
public:
    explicit FiniteKernel(Matrix K, bool markov = true);
    static FiniteKernel identity(std::size_t n);

    const Matrix& matrix() const { return K_; }
    bool is_markov() const { return markov_; }
    std::size_t in_states() const { return static_cast<std::size_t>(K_.rows()); }
    std::size_t out_states() const { return static_cast<std::size_t>(K_.cols()); }

private:
    Matrix K_;
    bool markov_;
};

/// y | x ~ N(B x + beta, Gamma).
class LinearGaussianKernel {
public:
    LinearGaussianKernel(Matrix B, Vector beta, Matrix Gamma);

    const Matrix& B() const { return B_; }
    const Vector& beta() const { return beta_; }
    const Matrix& Gamma() const { return Gamma_; }
    const Matrix& Gamma_cholesky() const { return Gamma_chol_; }
    std::size_t in_dim() const { return static_cast<std::size_t>(B_.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(B_.rows()); }

private:
    Matrix B_;
    Vector beta_;
    Matrix Gamma_;
    Matrix Gamma_chol_;
};

using StateMap = std::function<Vector(const Vector&)>;

/// y | x ~ N(b(x), Gamma) with a black-box drift map b.
class NonlinearGaussianKernel {
public:
    NonlinearGaussianKernel(StateMap drift, Matrix Gamma, std::size_t in_dim);

    Vector mean(const Vector& x) const;
    const Matrix& Gamma() const { return Gamma_; }
    const Matrix& Gamma_cholesky() const { return Gamma_chol_; }
    std::size_t in_dim() const { return in_dim_; }
    std::size_t out_dim() const { return static_cast<std::size_t>(Gamma_.rows()); }

private:
    StateMap drift_;
    Matrix Gamma_;
    Matrix Gamma_chol_;
    std::size_t in_dim_;
};

using TimeStateDrift = std::function<Vector(double, const Vector&)>;
using TimeStateDispersion = std::function<Matrix(double, const Vector&)>;

/// Transition obtained by running dX = b(t, X) dt + sigma(t, X) dW over [t0, t1],
/// discretized on a uniform grid of `steps` intervals.
class SdeEdgeKernel {
public:
    SdeEdgeKernel(TimeStateDrift drift, TimeStateDispersion dispersion, std::size_t dim, std::size_t noise_dim,
                  double t0, double t1, std::size_t steps);

    Vector drift(double t, const Vector& x) const { return drift_(t, x); }
    Matrix dispersion(double t, const Vector& x) const { return dispersion_(t, x); }
    std::size_t dim() const { return dim_; }
    std::size_t noise_dim() const { return noise_dim_; }
    double t0() const { return t0_; }
    double t1() const { return t1_; }
    std::size_t steps() const { return steps_; }

private:
    TimeStateDrift drift_;
    TimeStateDispersion dispersion_;
    std::size_t dim_;
    std::size_t noise_dim_;
    double t0_;
    double t1_;
    std::size_t steps_;
};

/// Linear SDE dX = (B(t) X + beta(t)) dt + sigma(t) dW over [t0, t1].
///
/// Tractable: pulling a Gaussian triplet back along it solves the backward
/// Riccati-type ODEs on the same grid the forward simulation uses.
class LinearSdeKernel {
public:
    using MatrixOfTime = std::function<Matrix(double)>;
    using VectorOfTime = std::function<Vector(double)>;

    LinearSdeKernel(MatrixOfTime B, VectorOfTime beta, MatrixOfTime sigma, std::size_t dim, std::size_t noise_dim,
                    double t0, double t1, std::size_t steps);
    /// Time-homogeneous coefficients.
    LinearSdeKernel(const Matrix& B, const Vector& beta, const Matrix& sigma, double t0, double t1,
                    std::size_t steps);

    Matrix B(double t) const { return B_(t); }
    Vector beta(double t) const { return beta_(t); }
    Matrix sigma(double t) const { return sigma_(t); }
    /// Diffusivity a(t) = sigma(t) sigma(t)'.
    Matrix a(double t) const;
    bool time_homogeneous() const { return homogeneous_; }
    std::size_t dim() const { return dim_; }
    std::size_t noise_dim() const { return noise_dim_; }
    double t0() const { return t0_; }
    double t1() const { return t1_; }
    std::size_t steps() const { return steps_; }

    /// The same process as a generic SDE edge kernel.
    SdeEdgeKernel as_sde() const;

private:
    MatrixOfTime B_;
    VectorOfTime beta_;
    MatrixOfTime sigma_;
    std::size_t dim_;
    std::size_t noise_dim_;
    double t0_;
    double t1_;
    std::size_t steps_;
    bool homogeneous_ = false;
};

using Kernel = std::variant<FiniteKernel, LinearGaussianKernel, NonlinearGaussianKernel, SdeEdgeKernel,
                            LinearSdeKernel>;

/// Whether the pullback of the matching h representation has a closed form.
bool is_tractable(const Kernel& k);
const char* kernel_kind_name(const Kernel& k);
std::size_t kernel_in_dim(const Kernel& k);
std::size_t kernel_out_dim(const Kernel& k);
/// Finite kernels act on finite h; all others on Gaussian triplets.
bool is_finite_kind(const Kernel& k);

struct FiniteMeasure {
    Vector weights;
};

/// mass * N(mean, cov); cov may be zero (point mass).
struct GaussianMeasure {
    Vector mean;
    Matrix cov;
    double mass = 1.0;
};

using Measure = std::variant<FiniteMeasure, GaussianMeasure>;

/// (K h)(x) = sum_y K(x, y) h(y), renormalized with the scale folded into log_scale.
FiniteH pullback(const FiniteKernel& k, const FiniteH& h);
GaussianTriplet pullback(const LinearGaussianKernel& k, const GaussianTriplet& h);
/// Solves the backward triplet ODEs over the edge and returns the value at t0.
GaussianTriplet pullback(const LinearSdeKernel& k, const GaussianTriplet& h);
HFun pullback(const Kernel& k, const HFun& h);

FiniteMeasure pushforward(const FiniteKernel& k, const FiniteMeasure& mu);
GaussianMeasure pushforward(const LinearGaussianKernel& k, const GaussianMeasure& mu);
Measure pushforward(const Kernel& k, const Measure& mu);

/// Chapman-Kolmogorov composition: first k1, then k2.
FiniteKernel compose_serial(const FiniteKernel& k1, const FiniteKernel& k2);
LinearGaussianKernel compose_serial(const LinearGaussianKernel& k1, const LinearGaussianKernel& k2);
Kernel compose_serial(const Kernel& k1, const Kernel& k2);

/// Independent application on the product space (Kronecker / block-diagonal).
FiniteKernel compose_parallel(const FiniteKernel& k1, const FiniteKernel& k2);
LinearGaussianKernel compose_parallel(const LinearGaussianKernel& k1, const LinearGaussianKernel& k2);
Kernel compose_parallel(const Kernel& k1, const Kernel& k2);

} // namespace bffg

#endif // BFFG_KERNEL_HPP
