#ifndef BFFG_BIF_HPP
#define BFFG_BIF_HPP

#include <optional>
#include <vector>

#include "bffg/backward_ode.hpp"
#include "bffg/hfun.hpp"
#include "bffg/message.hpp"
#include "bffg/tree.hpp"

namespace bffg {

/// Result of the backward information filter on a tree.
struct BackwardPass {
    /// Fused h (or g) at every latent vertex, observations included.
    std::vector<HFun> vertex_h;
    /// One message per edge: h at the child and its pullback to the parent.
    std::vector<Message> edge_messages;
    /// Triplet trajectory for SDE edges (empty for the others).
    std::vector<std::optional<TripletTrajectory>> trajectories;
    /// Whether the approximate kernel was used on the edge.
    std::vector<bool> used_approx;
};

/// Backward information filter.
///
/// Vertices are visited in reverse topological order. Each observation contributes
/// p(v | x); each edge contributes the pullback of the child's h through the forward
/// kernel, or through the approximate kernel when `use_approx` is set and one is present;
/// contributions meeting at a vertex are fused.
BackwardPass backward_filter(const TreeModel& model, bool use_approx);

/// log of the integral of the root prior against h at the root (log L when the pass is exact).
double log_prior_mass(const TreeModel& model, const BackwardPass& pass);

/// Exact log-likelihood of a finite-state tree. -infinity for impossible observations.
double exact_likelihood(const TreeModel& model);

} // namespace bffg

#endif // BFFG_BIF_HPP
