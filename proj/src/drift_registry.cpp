#include "bffg/drift_registry.hpp"

#include <cmath>

#include "bffg/errors.hpp"

namespace bffg {

namespace {

RegisteredDrift tanh_mixing(const std::vector<double>& p)
{
    if (p.size() != 2)
        throw ValidationError("drift tanh_mixing takes 2 parameters, got " + std::to_string(p.size()));
    Matrix A(2, 2);
    A << -p[0], p[0], p[1], -p[1];
    RegisteredDrift out;
    out.dim = 2;
    out.B = A;
    out.beta = Vector::Zero(2);
    out.drift = [A](double, const Vector& x) -> Vector { return (A * x).array().tanh().matrix(); };
    return out;
}

RegisteredDrift ornstein_uhlenbeck(const std::vector<double>& p)
{
    if (p.size() < 2)
        throw ValidationError("drift ornstein_uhlenbeck takes lambda followed by the mean vector");
    const double lambda = p[0];
    const auto d = static_cast<Eigen::Index>(p.size() - 1);
    Vector mu(d);
    for (Eigen::Index i = 0; i < d; ++i)
        mu(i) = p[static_cast<std::size_t>(i) + 1];
    RegisteredDrift out;
    out.dim = static_cast<std::size_t>(d);
    out.B = -lambda * Matrix::Identity(d, d);
    out.beta = lambda * mu;
    out.drift = [lambda, mu](double, const Vector& x) -> Vector { return -lambda * (x - mu); };
    return out;
}

} // namespace

RegisteredDrift make_drift(const std::string& name, const std::vector<double>& params)
{
    if (name == "tanh_mixing")
        return tanh_mixing(params);
    if (name == "ornstein_uhlenbeck")
        return ornstein_uhlenbeck(params);
    throw ValidationError("unknown drift \"" + name + "\"");
}

std::vector<std::string> drift_names() { return {"ornstein_uhlenbeck", "tanh_mixing"}; }

} // namespace bffg
