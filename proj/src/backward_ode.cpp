#include "bffg/backward_ode.hpp"

#include <cmath>
#include <sstream>

#include "bffg/errors.hpp"
#include "bffg/kernel.hpp"

namespace bffg {

LinearCoefficients LinearCoefficients::from_kernel(const LinearSdeKernel& k)
{
    return LinearCoefficients{[&k](double u) { return k.B(u); }, [&k](double u) { return k.beta(u); },
                              [&k](double u) { return k.a(u); }, k.time_homogeneous()};
}

namespace {

// Right-hand side of the triplet ODEs with caller-owned storage, so the RK4 loop
// does not allocate.
struct TripletRhs {
    Matrix HA;
    Vector aF;
    Matrix dH;
    Vector dF;
    double dc = 0.0;

    explicit TripletRhs(Eigen::Index d) : HA(d, d), aF(d), dH(d, d), dF(d) {}

    void operator()(const Matrix& B, const Vector& beta, const Matrix& a, const Matrix& H, const Vector& F)
    {
        HA.noalias() = H * a;
        dH.noalias() = HA * H;
        dH.noalias() -= B.transpose() * H;
        dH.noalias() -= H * B;
        dF.noalias() = HA * F;
        dF.noalias() -= B.transpose() * F;
        dF.noalias() += H * beta;
        aF.noalias() = a * F;
        dc = beta.dot(F) + 0.5 * F.dot(aF) - 0.5 * HA.trace();
    }
};

struct Coeffs {
    Matrix B;
    Vector beta;
    Matrix a;
};

Coeffs evaluate(const LinearCoefficients& c, double u)
{
    return Coeffs{c.B(u), c.beta(u), c.a(u)};
}

} // namespace

TripletTrajectory backward_ode_solve(const GaussianTriplet& terminal, const LinearCoefficients& coefficients,
                                     double s, double t, std::size_t steps)
{
    if (!(t > s))
        throw ValidationError("backward ODE: interval must satisfy t > s");
    if (steps < 1)
        throw ValidationError("backward ODE: need at least one step");
    const auto d = static_cast<Eigen::Index>(terminal.dim());
    if (terminal.H.rows() != d || terminal.H.cols() != d)
        throw DimensionError("backward ODE: H must be square of the triplet dimension");
    if (!is_symmetric(terminal.H, 1e-10))
        throw NumericalError("backward ODE: terminal H is not symmetric");

    const double h = (t - s) / static_cast<double>(steps);
    TripletTrajectory out;
    out.times.resize(steps + 1);
    out.triplets.resize(steps + 1);
    out.B.resize(steps + 1);
    out.beta.resize(steps + 1);
    out.a.resize(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        out.times[k] = (k == steps) ? t : s + static_cast<double>(k) * h;

    // Coefficients at grid points and at midpoints.
    std::vector<Coeffs> mid;
    if (coefficients.time_homogeneous) {
        const Coeffs c = evaluate(coefficients, t);
        for (std::size_t k = 0; k <= steps; ++k) {
            out.B[k] = c.B;
            out.beta[k] = c.beta;
            out.a[k] = c.a;
        }
        mid.assign(steps, c);
    } else {
        for (std::size_t k = 0; k <= steps; ++k) {
            Coeffs c = evaluate(coefficients, out.times[k]);
            out.B[k] = std::move(c.B);
            out.beta[k] = std::move(c.beta);
            out.a[k] = std::move(c.a);
        }
        mid.reserve(steps);
        for (std::size_t k = 0; k < steps; ++k)
            mid.push_back(evaluate(coefficients, out.times[k] + 0.5 * h));
    }
    for (std::size_t k = 0; k <= steps; ++k) {
        if (out.B[k].rows() != d || out.B[k].cols() != d || out.beta[k].size() != d || out.a[k].rows() != d ||
            out.a[k].cols() != d)
            throw DimensionError("backward ODE: coefficient dimensions do not match the triplet dimension");
    }

    out.triplets[steps] = terminal;
    TripletRhs k1(d), k2(d), k3(d), k4(d);
    Matrix H = terminal.H;
    Vector F = terminal.F;
    double c = terminal.c;
    Matrix Hs(d, d);
    Vector Fs(d);

    for (std::size_t k = steps; k > 0; --k) {
        const Coeffs& cm = mid[k - 1];
        // Step of size -h from u_k to u_{k-1}.
        k1(out.B[k], out.beta[k], out.a[k], H, F);
        Hs = H - 0.5 * h * k1.dH;
        Fs = F - 0.5 * h * k1.dF;
        k2(cm.B, cm.beta, cm.a, Hs, Fs);
        Hs = H - 0.5 * h * k2.dH;
        Fs = F - 0.5 * h * k2.dF;
        k3(cm.B, cm.beta, cm.a, Hs, Fs);
        Hs = H - h * k3.dH;
        Fs = F - h * k3.dF;
        k4(out.B[k - 1], out.beta[k - 1], out.a[k - 1], Hs, Fs);

        H -= (h / 6.0) * (k1.dH + 2.0 * k2.dH + 2.0 * k3.dH + k4.dH);
        F -= (h / 6.0) * (k1.dF + 2.0 * k2.dF + 2.0 * k3.dF + k4.dF);
        c -= (h / 6.0) * (k1.dc + 2.0 * k2.dc + 2.0 * k3.dc + k4.dc);
        Hs = H.transpose();
        H = 0.5 * (H + Hs);

        if (!H.allFinite() || !F.allFinite() || !std::isfinite(c)) {
            std::ostringstream msg;
            msg << "backward ODE blew up at grid time u = " << out.times[k - 1] << " (step " << (k - 1) << " of "
                << steps << ")";
            throw NumericalError(msg.str());
        }
        out.triplets[k - 1] = GaussianTriplet{c, F, H};
    }
    return out;
}

TripletTrajectory backward_ode_solve(const GaussianTriplet& terminal, const LinearSdeKernel& kernel)
{
    if (terminal.dim() != kernel.dim())
        throw DimensionError("backward ODE: triplet dimension " + std::to_string(terminal.dim()) +
                             " does not match SDE dimension " + std::to_string(kernel.dim()));
    return backward_ode_solve(terminal, LinearCoefficients::from_kernel(kernel), kernel.t0(), kernel.t1(),
                              kernel.steps());
}

} // namespace bffg
