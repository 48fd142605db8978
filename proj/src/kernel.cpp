#include "bffg/kernel.hpp"

#include <cmath>
#include <string>

#include "bffg/backward_ode.hpp"
#include "bffg/errors.hpp"

namespace bffg {

namespace {

constexpr double kMarkovTol = 1e-12;

std::string dims(Eigen::Index r, Eigen::Index c)
{
    return std::to_string(r) + "x" + std::to_string(c);
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

} // namespace

FiniteKernel::FiniteKernel(Matrix K, bool markov) : K_(std::move(K)), markov_(markov)
{
    if (K_.rows() == 0 || K_.cols() == 0)
        throw ValidationError("finite kernel: empty matrix");
    if (!K_.allFinite() || (K_.array() < 0.0).any())
        throw ValidationError("finite kernel: entries must be finite and nonnegative");
    if (markov_) {
        for (Eigen::Index i = 0; i < K_.rows(); ++i) {
            const double s = K_.row(i).sum();
            if (std::abs(s - 1.0) > kMarkovTol)
                throw ValidationError("finite kernel: row " + std::to_string(i) + " sums to " + std::to_string(s) +
                                      ", not 1 (mark the kernel non-Markov if intended)");
        }
    }
}

FiniteKernel FiniteKernel::identity(std::size_t n)
{
    const auto m = static_cast<Eigen::Index>(n);
    return FiniteKernel(Matrix::Identity(m, m));
}

LinearGaussianKernel::LinearGaussianKernel(Matrix B, Vector beta, Matrix Gamma)
    : B_(std::move(B)), beta_(std::move(beta)), Gamma_(std::move(Gamma))
{
    if (beta_.size() != B_.rows())
        throw DimensionError("linear gaussian kernel: beta has length " + std::to_string(beta_.size()) +
                             ", B has " + std::to_string(B_.rows()) + " rows");
    if (Gamma_.rows() != B_.rows() || Gamma_.cols() != B_.rows())
        throw DimensionError("linear gaussian kernel: Gamma is " + dims(Gamma_.rows(), Gamma_.cols()) +
                             ", expected " + dims(B_.rows(), B_.rows()));
    if (!B_.allFinite() || !beta_.allFinite())
        throw ValidationError("linear gaussian kernel: non-finite B or beta");
    Gamma_chol_ = spd_cholesky(Gamma_, "transition covariance Gamma");
}

NonlinearGaussianKernel::NonlinearGaussianKernel(StateMap drift, Matrix Gamma, std::size_t in_dim)
    : drift_(std::move(drift)), Gamma_(std::move(Gamma)), in_dim_(in_dim)
{
    if (!drift_)
        throw ValidationError("nonlinear gaussian kernel: missing drift map");
    Gamma_chol_ = spd_cholesky(Gamma_, "transition covariance Gamma");
}

Vector NonlinearGaussianKernel::mean(const Vector& x) const
{
    if (static_cast<std::size_t>(x.size()) != in_dim_)
        throw DimensionError("nonlinear gaussian kernel: state has dimension " + std::to_string(x.size()) +
                             ", expected " + std::to_string(in_dim_));
    Vector m = drift_(x);
    if (m.size() != Gamma_.rows())
        throw DimensionError("nonlinear gaussian kernel: drift returned dimension " + std::to_string(m.size()));
    return m;
}

SdeEdgeKernel::SdeEdgeKernel(TimeStateDrift drift, TimeStateDispersion dispersion, std::size_t dim,
                             std::size_t noise_dim, double t0, double t1, std::size_t steps)
    : drift_(std::move(drift)), dispersion_(std::move(dispersion)), dim_(dim), noise_dim_(noise_dim), t0_(t0),
      t1_(t1), steps_(steps)
{
    if (!drift_ || !dispersion_)
        throw ValidationError("sde kernel: missing drift or dispersion");
    if (!(t1_ > t0_))
        throw ValidationError("sde kernel: interval must satisfy t1 > t0");
    if (steps_ < 1)
        throw ValidationError("sde kernel: need at least one step");
    if (dim_ == 0 || noise_dim_ == 0)
        throw ValidationError("sde kernel: zero dimension");
}

LinearSdeKernel::LinearSdeKernel(MatrixOfTime B, VectorOfTime beta, MatrixOfTime sigma, std::size_t dim,
                                 std::size_t noise_dim, double t0, double t1, std::size_t steps)
    : B_(std::move(B)), beta_(std::move(beta)), sigma_(std::move(sigma)), dim_(dim), noise_dim_(noise_dim),
      t0_(t0), t1_(t1), steps_(steps)
{
    if (!B_ || !beta_ || !sigma_)
        throw ValidationError("linear sde kernel: missing coefficient function");
    if (!(t1_ > t0_))
        throw ValidationError("linear sde kernel: interval must satisfy t1 > t0");
    if (steps_ < 1)
        throw ValidationError("linear sde kernel: need at least one step");
    const auto d = static_cast<Eigen::Index>(dim_);
    const Matrix b0 = B_(t0_);
    const Matrix s0 = sigma_(t0_);
    if (b0.rows() != d || b0.cols() != d || beta_(t0_).size() != d || s0.rows() != d ||
        s0.cols() != static_cast<Eigen::Index>(noise_dim_))
        throw DimensionError("linear sde kernel: coefficient dimensions do not match dim " + std::to_string(dim_));
}

LinearSdeKernel::LinearSdeKernel(const Matrix& B, const Vector& beta, const Matrix& sigma, double t0, double t1,
                                 std::size_t steps)
    : LinearSdeKernel([B](double) { return B; }, [beta](double) { return beta; }, [sigma](double) { return sigma; },
                      static_cast<std::size_t>(B.rows()), static_cast<std::size_t>(sigma.cols()), t0, t1, steps)
{
    if (B.rows() != B.cols())
        throw DimensionError("linear sde kernel: B must be square");
    homogeneous_ = true;
}

Matrix LinearSdeKernel::a(double t) const
{
    const Matrix s = sigma_(t);
    return s * s.transpose();
}

SdeEdgeKernel LinearSdeKernel::as_sde() const
{
    auto B = B_;
    auto beta = beta_;
    auto sigma = sigma_;
    return SdeEdgeKernel([B, beta](double t, const Vector& x) -> Vector { return B(t) * x + beta(t); },
                         [sigma](double t, const Vector&) { return sigma(t); }, dim_, noise_dim_, t0_, t1_, steps_);
}

bool is_tractable(const Kernel& k)
{
    return std::holds_alternative<FiniteKernel>(k) || std::holds_alternative<LinearGaussianKernel>(k) ||
           std::holds_alternative<LinearSdeKernel>(k);
}

bool is_finite_kind(const Kernel& k)
{
    return std::holds_alternative<FiniteKernel>(k);
}

const char* kernel_kind_name(const Kernel& k)
{
    return std::visit(overloaded{[](const FiniteKernel&) { return "finite"; },
                                 [](const LinearGaussianKernel&) { return "linear_gaussian"; },
                                 [](const NonlinearGaussianKernel&) { return "nonlinear_gaussian"; },
                                 [](const SdeEdgeKernel&) { return "sde"; },
                                 [](const LinearSdeKernel&) { return "linear_sde"; }},
                      k);
}

std::size_t kernel_in_dim(const Kernel& k)
{
    return std::visit(overloaded{[](const FiniteKernel& f) { return f.in_states(); },
                                 [](const LinearGaussianKernel& g) { return g.in_dim(); },
                                 [](const NonlinearGaussianKernel& g) { return g.in_dim(); },
                                 [](const SdeEdgeKernel& s) { return s.dim(); },
                                 [](const LinearSdeKernel& s) { return s.dim(); }},
                      k);
}

std::size_t kernel_out_dim(const Kernel& k)
{
    return std::visit(overloaded{[](const FiniteKernel& f) { return f.out_states(); },
                                 [](const LinearGaussianKernel& g) { return g.out_dim(); },
                                 [](const NonlinearGaussianKernel& g) { return g.out_dim(); },
                                 [](const SdeEdgeKernel& s) { return s.dim(); },
                                 [](const LinearSdeKernel& s) { return s.dim(); }},
                      k);
}

FiniteH pullback(const FiniteKernel& k, const FiniteH& h)
{
    if (k.out_states() != h.size())
        throw DimensionError("pullback: kernel has " + std::to_string(k.out_states()) + " target states, h has " +
                             std::to_string(h.size()));
    return FiniteH::from_values(k.matrix() * h.values, h.log_scale);
}

GaussianTriplet pullback(const LinearGaussianKernel& k, const GaussianTriplet& h)
{
    if (k.out_dim() != h.dim())
        throw DimensionError("pullback: kernel output dimension " + std::to_string(k.out_dim()) +
                             " does not match triplet dimension " + std::to_string(h.dim()));
    return gaussian_pullback(k.B(), k.beta(), k.Gamma_cholesky(), h);
}

GaussianTriplet pullback(const LinearSdeKernel& k, const GaussianTriplet& h)
{
    return backward_ode_solve(h, k).start();
}

HFun pullback(const Kernel& k, const HFun& h)
{
    if (const auto* fk = std::get_if<FiniteKernel>(&k)) {
        const auto* fh = std::get_if<FiniteH>(&h);
        if (fh == nullptr)
            throw DimensionError("pullback: finite kernel needs a finite h");
        return pullback(*fk, *fh);
    }
    const auto* gh = std::get_if<GaussianTriplet>(&h);
    if (gh == nullptr)
        throw DimensionError(std::string("pullback: ") + kernel_kind_name(k) + " kernel needs a Gaussian triplet");
    if (const auto* lg = std::get_if<LinearGaussianKernel>(&k))
        return pullback(*lg, *gh);
    if (const auto* ls = std::get_if<LinearSdeKernel>(&k))
        return pullback(*ls, *gh);
    throw UnsupportedError(std::string("pullback: no closed form for ") + kernel_kind_name(k) +
                           " kernels (supply an approximate kernel)");
}

FiniteMeasure pushforward(const FiniteKernel& k, const FiniteMeasure& mu)
{
    if (static_cast<std::size_t>(mu.weights.size()) != k.in_states())
        throw DimensionError("pushforward: measure has " + std::to_string(mu.weights.size()) +
                             " states, kernel has " + std::to_string(k.in_states()));
    return FiniteMeasure{k.matrix().transpose() * mu.weights};
}

GaussianMeasure pushforward(const LinearGaussianKernel& k, const GaussianMeasure& mu)
{
    if (static_cast<std::size_t>(mu.mean.size()) != k.in_dim() || mu.cov.rows() != mu.mean.size() ||
        mu.cov.cols() != mu.mean.size())
        throw DimensionError("pushforward: gaussian measure dimension does not match kernel input " +
                             std::to_string(k.in_dim()));
    return GaussianMeasure{k.B() * mu.mean + k.beta(), symmetrized(k.B() * mu.cov * k.B().transpose() + k.Gamma()),
                           mu.mass};
}

Measure pushforward(const Kernel& k, const Measure& mu)
{
    if (const auto* fk = std::get_if<FiniteKernel>(&k)) {
        const auto* fm = std::get_if<FiniteMeasure>(&mu);
        if (fm == nullptr)
            throw DimensionError("pushforward: finite kernel needs a finite measure");
        return pushforward(*fk, *fm);
    }
    if (const auto* lg = std::get_if<LinearGaussianKernel>(&k)) {
        const auto* gm = std::get_if<GaussianMeasure>(&mu);
        if (gm == nullptr)
            throw DimensionError("pushforward: linear gaussian kernel needs a gaussian measure");
        return pushforward(*lg, *gm);
    }
    throw UnsupportedError(std::string("pushforward: not available in closed form for ") + kernel_kind_name(k) +
                           " kernels");
}

FiniteKernel compose_serial(const FiniteKernel& k1, const FiniteKernel& k2)
{
    if (k1.out_states() != k2.in_states())
        throw DimensionError("compose_serial: codomain of the first kernel (" + std::to_string(k1.out_states()) +
                             ") differs from domain of the second (" + std::to_string(k2.in_states()) + ")");
    return FiniteKernel(k1.matrix() * k2.matrix(), k1.is_markov() && k2.is_markov());
}

LinearGaussianKernel compose_serial(const LinearGaussianKernel& k1, const LinearGaussianKernel& k2)
{
    if (k1.out_dim() != k2.in_dim())
        throw DimensionError("compose_serial: dimension mismatch between linear gaussian kernels");
    return LinearGaussianKernel(k2.B() * k1.B(), k2.B() * k1.beta() + k2.beta(),
                                symmetrized(k2.B() * k1.Gamma() * k2.B().transpose() + k2.Gamma()));
}

Kernel compose_serial(const Kernel& k1, const Kernel& k2)
{
    if (const auto* a = std::get_if<FiniteKernel>(&k1))
        if (const auto* b = std::get_if<FiniteKernel>(&k2))
            return compose_serial(*a, *b);
    if (const auto* a = std::get_if<LinearGaussianKernel>(&k1))
        if (const auto* b = std::get_if<LinearGaussianKernel>(&k2))
            return compose_serial(*a, *b);
    throw UnsupportedError(std::string("compose_serial: unsupported kernel pair ") + kernel_kind_name(k1) + " / " +
                           kernel_kind_name(k2));
}

FiniteKernel compose_parallel(const FiniteKernel& k1, const FiniteKernel& k2)
{
    const Matrix& a = k1.matrix();
    const Matrix& b = k2.matrix();
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return FiniteKernel(std::move(out), k1.is_markov() && k2.is_markov());
}

LinearGaussianKernel compose_parallel(const LinearGaussianKernel& k1, const LinearGaussianKernel& k2)
{
    const auto r1 = static_cast<Eigen::Index>(k1.out_dim()), c1 = static_cast<Eigen::Index>(k1.in_dim());
    const auto r2 = static_cast<Eigen::Index>(k2.out_dim()), c2 = static_cast<Eigen::Index>(k2.in_dim());
    Matrix B = Matrix::Zero(r1 + r2, c1 + c2);
    B.topLeftCorner(r1, c1) = k1.B();
    B.bottomRightCorner(r2, c2) = k2.B();
    Vector beta(r1 + r2);
    beta << k1.beta(), k2.beta();
    Matrix G = Matrix::Zero(r1 + r2, r1 + r2);
    G.topLeftCorner(r1, r1) = k1.Gamma();
    G.bottomRightCorner(r2, r2) = k2.Gamma();
    return LinearGaussianKernel(std::move(B), std::move(beta), std::move(G));
}

Kernel compose_parallel(const Kernel& k1, const Kernel& k2)
{
    if (const auto* a = std::get_if<FiniteKernel>(&k1))
        if (const auto* b = std::get_if<FiniteKernel>(&k2))
            return compose_parallel(*a, *b);
    if (const auto* a = std::get_if<LinearGaussianKernel>(&k1))
        if (const auto* b = std::get_if<LinearGaussianKernel>(&k2))
            return compose_parallel(*a, *b);
    throw UnsupportedError(std::string("compose_parallel: unsupported kernel pair ") + kernel_kind_name(k1) + " / " +
                           kernel_kind_name(k2));
}

} // namespace bffg
