#ifndef BFFG_INFER_HPP
#define BFFG_INFER_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bffg/bif.hpp"
#include "bffg/guide.hpp"
#include "bffg/tree.hpp"

namespace bffg {

/// Parameter vector with a box and per-coordinate random-walk step sizes.
struct ParamSpace {
    std::vector<std::string> names;
    Vector theta;
    Vector lower;
    Vector upper;
    Vector step;
    /// Optional log prior density; flat on the box when empty.
    std::function<double(const Vector&)> log_prior;

    std::size_t size() const { return static_cast<std::size_t>(theta.size()); }
    bool contains(const Vector& t) const;
    /// Throws ValidationError for inconsistent sizes, empty or infinite boxes, or a start outside the box.
    void validate() const;
};

/// Reflects a proposal back into [lower, upper].
double reflect_into(double value, double lower, double upper);

using ModelBuilder = std::function<TreeModel(const Vector&)>;
using PassBuilder = std::function<BackwardPass(const TreeModel&)>;

struct LikelihoodRow {
    Vector theta;
    double log_likelihood = 0.0;
};

/// Exact log-likelihood at each grid point (finite-state models).
std::vector<LikelihoodRow> likelihood_scan(const ModelBuilder& build, const std::vector<Vector>& grid);

struct McLikelihood {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    std::size_t degenerate = 0;
};

/// Mean and standard error of exp(log L-hat) over n guided samples, sample i drawn from
/// substream(seed, i). The result does not depend on `threads` (0 = hardware concurrency).
McLikelihood mc_likelihood(const TreeModel& model, const BackwardPass& pass, std::size_t n, std::uint64_t seed,
                           std::size_t threads = 1);

struct McmcState {
    Vector theta;
    WeightedSample sample;
    Innovations innovations;
    double log_what = 0.0;
    std::size_t iteration = 0;
};

struct McmcConfig {
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    /// Abort after this many consecutive iterations in which every proposal was degenerate.
    std::size_t max_stall = 100;
    bool use_approx = true;
    bool update_paths = true;
    /// Called after every iteration.
    std::function<void(const McmcState&)> observer;
};

struct TraceRow {
    std::size_t iteration = 0;
    Vector theta;
    double log_what = 0.0;
    bool path_accepted = false;
    std::vector<bool> theta_accepted;
};

struct McmcResult {
    std::vector<TraceRow> trace;
    McmcState final_state;
    std::size_t path_accepts = 0;
    std::vector<std::size_t> theta_accepts;

    double path_acceptance_rate() const;
    double theta_acceptance_rate(std::size_t j) const;
};

/// Metropolis-within-Gibbs over paths and parameters.
///
/// A path update proposes fresh innovations and accepts with probability
/// min(1, exp(log w' - log w)), log w = log_g_root + log_weight. Each parameter coordinate
/// then gets a reflected Gaussian random-walk proposal, scored by rebuilding the model,
/// rerunning the backward pass and rerunning the guided pass on the current innovations.
/// Throws StallError when max_stall consecutive iterations produce only degenerate proposals.
McmcResult mcmc_run(const ModelBuilder& build, const ParamSpace& space, const McmcConfig& config,
                    const PassBuilder& pass_builder = {});

} // namespace bffg

#endif // BFFG_INFER_HPP
