#ifndef BFFG_TREE_HPP
#define BFFG_TREE_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bffg/kernel.hpp"
#include "bffg/observation.hpp"

namespace bffg {

enum class VertexKind { finite, gaussian };

struct Vertex {
    std::string id;
    VertexKind kind = VertexKind::finite;
    /// Number of states (finite) or state dimension (gaussian).
    std::size_t dim = 0;
};

struct Edge {
    std::size_t parent = 0;
    std::size_t child = 0;
    Kernel kernel;
    /// Kernel used for backward filtering in place of `kernel`; required for intractable kernels.
    std::optional<Kernel> approx;
};

/// A leaf observation hanging off a latent vertex.
struct Observation {
    std::string id;
    std::size_t vertex = 0;
    ObservationKernel kernel;
    ObservationValue value;
};

struct FinitePrior {
    Vector weights;
};
struct GaussianPrior {
    Vector mean;
    Matrix cov;
};
struct DiracPrior {
    Vector value;
};
/// Law of the root vertex.
using RootPrior = std::variant<FinitePrior, GaussianPrior, DiracPrior>;

/// Directed tree of latent vertices with kernels on edges, observations at leaves
/// and a prior on the root. Validated on construction; immutable afterwards.
class TreeModel {
public:
    TreeModel(std::vector<Vertex> vertices, std::vector<Edge> edges, std::vector<Observation> observations,
              RootPrior prior);

    const std::vector<Vertex>& vertices() const { return vertices_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Observation>& observations() const { return observations_; }
    const RootPrior& prior() const { return prior_; }

    std::size_t root() const { return root_; }
    /// Vertices in topological order (root first).
    const std::vector<std::size_t>& order() const { return order_; }
    /// Indices into edges() leaving the vertex.
    const std::vector<std::size_t>& child_edges(std::size_t v) const { return child_edges_[v]; }
    /// Indices into observations() attached to the vertex.
    const std::vector<std::size_t>& vertex_observations(std::size_t v) const { return vertex_obs_[v]; }
    std::optional<std::size_t> parent_edge(std::size_t v) const { return parent_edge_[v]; }

    std::size_t vertex_index(const std::string& id) const;
    bool all_finite() const;
    /// Every edge either tractable or paired with an approximation.
    bool has_approximations_where_needed() const;
    /// Latent vertices with no latent children.
    std::size_t latent_leaf_count() const;

private:
    std::vector<Vertex> vertices_;
    std::vector<Edge> edges_;
    std::vector<Observation> observations_;
    RootPrior prior_;
    std::size_t root_ = 0;
    std::vector<std::size_t> order_;
    std::vector<std::vector<std::size_t>> child_edges_;
    std::vector<std::vector<std::size_t>> vertex_obs_;
    std::vector<std::optional<std::size_t>> parent_edge_;

    void validate();
};

} // namespace bffg

#endif // BFFG_TREE_HPP
