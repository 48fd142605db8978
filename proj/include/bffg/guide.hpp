#ifndef BFFG_GUIDE_HPP
#define BFFG_GUIDE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "bffg/backward_ode.hpp"
#include "bffg/bif.hpp"
#include "bffg/kernel.hpp"
#include "bffg/tree.hpp"

namespace bffg {

using Rng = std::mt19937_64;

/// Independent generator for item `index` of a run seeded with `seed`.
Rng substream(std::uint64_t seed, std::uint64_t index);

/// A finite state index or a real state vector.
using LatentValue = std::variant<std::size_t, Vector>;

/// All randomness consumed by one guided forward pass.
///
/// Entry 0 drives the root, entry e + 1 drives edge e: one uniform for finite draws,
/// standard normals for Gaussian draws (d values) and SDE edges (steps x noise_dim values).
/// Rerunning forward_guide with the same innovations under different parameters gives
/// the same path in the non-centred sense used by the parameter updates.
struct Innovations {
    std::vector<Vector> draws;
};

Innovations draw_innovations(const TreeModel& model, Rng& rng);

struct WeightedSample {
    std::vector<LatentValue> values;
    /// Discretized path (dim x (steps + 1), one column per grid time) for SDE edges.
    std::vector<std::optional<Matrix>> paths;
    double log_weight = 0.0;
    double log_g_root = 0.0;
    bool degenerate = false;
    std::string degenerate_reason;

    /// log of the estimator L-hat = (pi g_root) * Psi.
    double log_lhat() const { return log_g_root + log_weight; }
};

struct GuidedRow {
    /// Guided transition probabilities p(y | x), proportional to kappa(x, y) g(y).
    Vector probabilities;
    double log_w_increment = 0.0;
    bool degenerate = false;
};

/// Guided transition out of state x: kappa(x, .) tilted by g, with weight
/// log (kappa g)(x) - log (pulled)(x), where `pulled` is the backward-pass pullback.
GuidedRow guided_row(const FiniteKernel& kappa, const FiniteH& g, const FiniteH& pulled, std::size_t x);

struct DiscreteStep {
    std::size_t y = 0;
    double log_w_increment = 0.0;
    bool degenerate = false;
};

/// Samples y from the guided row using the uniform `u` (inverse CDF).
DiscreteStep guided_discrete_step(const FiniteKernel& kappa, const FiniteH& g, const FiniteH& pulled, std::size_t x,
                                  double u);
DiscreteStep guided_discrete_step(const FiniteKernel& kappa, const FiniteH& g, const FiniteH& pulled, std::size_t x,
                                  Rng& rng);
/// Exact case: the backward kernel is kappa itself, so the increment is 0.
DiscreteStep guided_discrete_step(const FiniteKernel& kappa, const FiniteH& g, std::size_t x, Rng& rng);

/// Drift of the guided diffusion, b + a (F - H x).
Vector guided_drift(const Vector& b, const Matrix& a, const GaussianTriplet& g, const Vector& x);

/// (A g / g)(u, x) = (b - b_tilde)' r + tr[(a - a_tilde)(r r' - H)] / 2 with r = F - H x,
/// where b_tilde = B x + beta is the auxiliary drift evaluated at x.
double guided_log_weight_rate(const Vector& b, const Vector& b_tilde, const Matrix& a, const Matrix& a_tilde,
                              const GaussianTriplet& g, const Vector& x);

struct GuidedSdeSpec {
    const SdeEdgeKernel& forward;
    const TripletTrajectory& trajectory;
};

struct SdeResult {
    Matrix path;
    double log_w_increment = 0.0;
    bool degenerate = false;
    std::size_t failed_index = 0;
};

/// Euler-Maruyama on the trajectory grid for the guided SDE, with the log-weight
/// accumulated as a left-endpoint Riemann sum of guided_log_weight_rate.
/// `noise` holds steps * noise_dim standard normals, consumed step by step.
SdeResult simulate_guided_sde(const GuidedSdeSpec& spec, const Vector& x_start, const Vector& noise);
SdeResult simulate_guided_sde(const GuidedSdeSpec& spec, const Vector& x_start, Rng& rng);

/// One guided forward pass over the tree using the given innovations.
WeightedSample forward_guide(const TreeModel& model, const BackwardPass& pass, const Innovations& innovations);
WeightedSample forward_guide(const TreeModel& model, const BackwardPass& pass, Rng& rng);

struct PriorDraw {
    std::vector<LatentValue> values;
    std::vector<std::optional<Matrix>> paths;
    /// One simulated value per model observation.
    std::vector<ObservationValue> observations;
};

/// Unconditioned simulation from the forward model (kernels, Euler-Maruyama on SDE edges).
PriorDraw forward_simulate(const TreeModel& model, Rng& rng);

} // namespace bffg

#endif // BFFG_GUIDE_HPP
