#include "bffg/hfun.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bffg/errors.hpp"

namespace bffg {

namespace {

constexpr double kRowSumTol = 1e-12;

} // namespace

FiniteObservation::FiniteObservation(Matrix lambda) : lambda_(std::move(lambda))
{
    if (lambda_.rows() == 0 || lambda_.cols() == 0)
        throw ValidationError("finite observation kernel: empty matrix");
    if (!lambda_.allFinite() || (lambda_.array() < 0.0).any())
        throw ValidationError("finite observation kernel: entries must be finite and nonnegative");
    for (Eigen::Index i = 0; i < lambda_.rows(); ++i) {
        if (std::abs(lambda_.row(i).sum() - 1.0) > kRowSumTol)
            throw ValidationError("finite observation kernel: row " + std::to_string(i) + " does not sum to 1");
    }
}

GaussianObservation::GaussianObservation(Matrix L, Matrix Sigma) : L_(std::move(L)), Sigma_(std::move(Sigma))
{
    if (Sigma_.rows() != L_.rows() || Sigma_.cols() != L_.rows())
        throw DimensionError("gaussian observation: Sigma must be " + std::to_string(L_.rows()) + "x" +
                             std::to_string(L_.rows()));
    Sigma_chol_ = spd_cholesky(Sigma_, "observation covariance Sigma");
}

FiniteH FiniteH::ones(std::size_t n)
{
    return FiniteH{Vector::Ones(static_cast<Eigen::Index>(n)), 0.0};
}

FiniteH FiniteH::from_values(const Vector& v, double log_scale)
{
    FiniteH h{v, log_scale};
    h.normalize();
    return h;
}

double FiniteH::operator()(std::size_t x) const
{
    return std::exp(log_scale) * values(static_cast<Eigen::Index>(x));
}

double FiniteH::log_at(std::size_t x) const
{
    return std::log(values(static_cast<Eigen::Index>(x))) + log_scale;
}

Vector FiniteH::represented() const
{
    return std::exp(log_scale) * values;
}

void FiniteH::normalize()
{
    if (values.size() == 0)
        return;
    if (!values.allFinite() || (values.array() < 0.0).any())
        throw NumericalError("finite h: values must be finite and nonnegative");
    const double top = values.maxCoeff();
    if (top > 0.0) {
        values /= top;
        log_scale += std::log(top);
    }
}

GaussianTriplet GaussianTriplet::ones(std::size_t d)
{
    const auto n = static_cast<Eigen::Index>(d);
    return GaussianTriplet{0.0, Vector::Zero(n), Matrix::Zero(n, n)};
}

double GaussianTriplet::log_at(const Vector& x) const
{
    return -c + F.dot(x) - 0.5 * x.dot(H * x);
}

double GaussianTriplet::operator()(const Vector& x) const
{
    return std::exp(log_at(x));
}

FiniteH fuse(const FiniteH& a, const FiniteH& b)
{
    if (a.size() != b.size())
        throw DimensionError("fuse: finite h sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    return FiniteH::from_values(a.values.cwiseProduct(b.values), a.log_scale + b.log_scale);
}

GaussianTriplet fuse(const GaussianTriplet& a, const GaussianTriplet& b)
{
    if (a.dim() != b.dim())
        throw DimensionError("fuse: triplet dimensions " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
    return GaussianTriplet{a.c + b.c, a.F + b.F, a.H + b.H};
}

HFun fuse(const HFun& a, const HFun& b)
{
    if (a.index() != b.index())
        throw DimensionError("fuse: cannot fuse a finite h with a Gaussian triplet");
    if (const auto* fa = std::get_if<FiniteH>(&a))
        return fuse(*fa, std::get<FiniteH>(b));
    return fuse(std::get<GaussianTriplet>(a), std::get<GaussianTriplet>(b));
}

FiniteH from_observation(const FiniteObservation& kernel, std::size_t label)
{
    if (label >= kernel.labels())
        throw ValidationError("observation label " + std::to_string(label) + " out of range (alphabet size " +
                              std::to_string(kernel.labels()) + ")");
    return FiniteH::from_values(kernel.lambda().col(static_cast<Eigen::Index>(label)));
}

GaussianTriplet from_observation(const GaussianObservation& kernel, const Vector& value)
{
    if (static_cast<std::size_t>(value.size()) != kernel.obs_dim())
        throw DimensionError("observation value has dimension " + std::to_string(value.size()) + ", expected " +
                             std::to_string(kernel.obs_dim()));
    const Matrix& chol = kernel.Sigma_cholesky();
    const auto llt_solve = [&](const Matrix& rhs) -> Matrix {
        return chol.transpose().triangularView<Eigen::Upper>().solve(chol.triangularView<Eigen::Lower>().solve(rhs));
    };
    const Vector sinv_v = llt_solve(value);
    const Matrix sinv_L = llt_solve(kernel.L());
    const double p = static_cast<double>(value.size());
    GaussianTriplet g;
    g.c = 0.5 * value.dot(sinv_v) + 0.5 * (p * std::log(2.0 * std::numbers::pi) + log_det_from_cholesky(chol));
    g.F = kernel.L().transpose() * sinv_v;
    g.H = symmetrized(kernel.L().transpose() * sinv_L);
    return g;
}

HFun from_observation(const ObservationKernel& kernel, const ObservationValue& value)
{
    if (const auto* fin = std::get_if<FiniteObservation>(&kernel)) {
        const auto* label = std::get_if<std::size_t>(&value);
        if (label == nullptr)
            throw ValidationError("finite observation kernel needs a discrete label");
        return from_observation(*fin, *label);
    }
    const auto* vec = std::get_if<Vector>(&value);
    if (vec == nullptr)
        throw ValidationError("gaussian observation kernel needs a real vector value");
    return from_observation(std::get<GaussianObservation>(kernel), *vec);
}

namespace {

// Pieces shared by tilt / log_expectation / gaussian_pullback: with y = mean + S z,
// g(y) = g(mean) exp(f'z - z'Qz/2), f = S'(F - H mean), Q = S'HS.
struct TiltCore {
    Matrix chol; // of I + Q
    Vector f;
};

TiltCore tilt_core(const Vector& mean, const Matrix& S, const GaussianTriplet& g)
{
    if (mean.size() != S.rows() || static_cast<std::size_t>(mean.size()) != g.dim())
        throw DimensionError("gaussian tilt: dimension mismatch (mean " + std::to_string(mean.size()) +
                             ", triplet " + std::to_string(g.dim()) + ")");
    const auto k = S.cols();
    Matrix M = Matrix::Identity(k, k);
    M.noalias() += S.transpose() * g.H * S;
    Eigen::LLT<Matrix> llt(symmetrized(M));
    if (llt.info() != Eigen::Success)
        throw NumericalError("gaussian tilt: product with h is not normalizable (I + S'HS not positive definite)");
    return TiltCore{llt.matrixL(), S.transpose() * g.score(mean)};
}

} // namespace

GaussianTilt tilt(const Vector& mean, const Matrix& S, const GaussianTriplet& g)
{
    const TiltCore core = tilt_core(mean, S, g);
    const auto L = core.chol.triangularView<Eigen::Lower>();
    const Vector y = L.solve(core.f); // M^{-1} f = L'^{-1} y
    const Vector z_mean = core.chol.transpose().triangularView<Eigen::Upper>().solve(y);
    GaussianTilt out;
    out.log_mass = g.log_at(mean) - 0.5 * log_det_from_cholesky(core.chol) + 0.5 * y.squaredNorm();
    out.mean = mean + S * z_mean;
    // S L'^{-1} is a square root of S M^{-1} S'.
    out.cov_sqrt = core.chol.triangularView<Eigen::Lower>().solve(S.transpose()).transpose();
    return out;
}

double log_expectation(const Vector& mean, const Matrix& S, const GaussianTriplet& g)
{
    const TiltCore core = tilt_core(mean, S, g);
    const Vector y = core.chol.triangularView<Eigen::Lower>().solve(core.f);
    return g.log_at(mean) - 0.5 * log_det_from_cholesky(core.chol) + 0.5 * y.squaredNorm();
}

GaussianTriplet gaussian_pullback(const Matrix& B, const Vector& beta, const Matrix& S, const GaussianTriplet& g)
{
    const auto d_out = static_cast<Eigen::Index>(g.dim());
    if (B.rows() != d_out || beta.size() != d_out || S.rows() != d_out)
        throw DimensionError("gaussian pullback: kernel output dimension does not match triplet dimension " +
                             std::to_string(d_out));
    const auto k = S.cols();
    Matrix M = Matrix::Identity(k, k);
    M.noalias() += S.transpose() * g.H * S;
    Eigen::LLT<Matrix> llt(symmetrized(M));
    if (llt.info() != Eigen::Success)
        throw NumericalError("gaussian pullback: I + S'HS not positive definite");
    const Matrix chol = llt.matrixL();
    // W = S M^{-1} S' = R'R with R = L^{-1} S'.
    const Matrix R = chol.triangularView<Eigen::Lower>().solve(S.transpose());
    const Matrix W = R.transpose() * R;
    const Matrix HW = g.H * W;
    const Matrix Hbar = symmetrized(g.H - HW * g.H);
    const Vector Fbar = g.F - HW * g.F;
    const double cbar = g.c + 0.5 * log_det_from_cholesky(chol) - 0.5 * g.F.dot(W * g.F);

    GaussianTriplet out;
    out.H = symmetrized(B.transpose() * Hbar * B);
    out.F = B.transpose() * (Fbar - Hbar * beta);
    out.c = cbar - Fbar.dot(beta) + 0.5 * beta.dot(Hbar * beta);
    if (!out.H.allFinite() || !out.F.allFinite() || !std::isfinite(out.c))
        throw NumericalError("gaussian pullback: non-finite triplet");
    return out;
}

} // namespace bffg
