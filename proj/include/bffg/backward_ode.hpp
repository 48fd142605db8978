#ifndef BFFG_BACKWARD_ODE_HPP
#define BFFG_BACKWARD_ODE_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "bffg/hfun.hpp"
#include "bffg/linalg.hpp"

namespace bffg {

class LinearSdeKernel;

/// Coefficients of the auxiliary linear process: drift B(u) x + beta(u), diffusivity a(u).
struct LinearCoefficients {
    std::function<Matrix(double)> B;
    std::function<Vector(double)> beta;
    std::function<Matrix(double)> a;
    /// When set, B/beta/a are evaluated once and reused on the whole grid.
    bool time_homogeneous = false;

    static LinearCoefficients from_kernel(const LinearSdeKernel& k);
};

/// Triplets (c, F, H)(u_k) on the uniform grid u_k = s + k (t - s) / M, k = 0..M,
/// together with the auxiliary coefficients at the same grid points.
struct TripletTrajectory {
    std::vector<double> times;
    std::vector<GaussianTriplet> triplets;
    std::vector<Matrix> B;
    std::vector<Vector> beta;
    std::vector<Matrix> a;

    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    const GaussianTriplet& start() const { return triplets.front(); }
    const GaussianTriplet& end() const { return triplets.back(); }
};

/// Integrates, backwards from u = t to u = s with fixed-step RK4 on M steps,
///   dH = (-B'H - HB + H a H) du
///   dF = (-B'F + H a F + H beta) du
///   dc = (beta'F + F'aF/2 - tr(H a)/2) du
/// starting from the terminal triplet. The last grid value equals `terminal` exactly.
/// Throws NumericalError (naming the grid time reached) if any entry becomes non-finite.
TripletTrajectory backward_ode_solve(const GaussianTriplet& terminal, const LinearCoefficients& coefficients,
                                     double s, double t, std::size_t steps);

TripletTrajectory backward_ode_solve(const GaussianTriplet& terminal, const LinearSdeKernel& kernel);

} // namespace bffg

#endif // BFFG_BACKWARD_ODE_HPP
