#include "bffg/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "bffg/errors.hpp"

namespace bffg {

namespace {

std::string join_ids(const std::vector<std::string>& ids)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < ids.size(); ++i)
        os << (i ? ", " : "") << '"' << ids[i] << '"';
    return os.str();
}

// Returns a cycle (as vertex indices, in traversal order) if the directed graph has one.
std::vector<std::size_t> find_cycle(std::size_t n, const std::vector<Edge>& edges)
{
    std::vector<std::vector<std::size_t>> out(n);
    for (const Edge& e : edges)
        out[e.parent].push_back(e.child);
    enum class Mark { white, grey, black };
    std::vector<Mark> mark(n, Mark::white);
    std::vector<std::size_t> stack;

    // Iterative DFS keeping the grey path in `stack`.
    for (std::size_t start = 0; start < n; ++start) {
        if (mark[start] != Mark::white)
            continue;
        std::vector<std::pair<std::size_t, std::size_t>> frames{{start, 0}};
        mark[start] = Mark::grey;
        stack.assign(1, start);
        while (!frames.empty()) {
            auto& [v, next] = frames.back();
            if (next < out[v].size()) {
                const std::size_t w = out[v][next++];
                if (mark[w] == Mark::grey) {
                    auto it = std::find(stack.begin(), stack.end(), w);
                    return std::vector<std::size_t>(it, stack.end());
                }
                if (mark[w] == Mark::white) {
                    mark[w] = Mark::grey;
                    stack.push_back(w);
                    frames.emplace_back(w, 0);
                }
            } else {
                mark[v] = Mark::black;
                stack.pop_back();
                frames.pop_back();
            }
        }
    }
    return {};
}

bool is_probability_vector(const Vector& w)
{
    return w.allFinite() && !(w.array() < 0.0).any() && std::abs(w.sum() - 1.0) <= 1e-9;
}

} // namespace

TreeModel::TreeModel(std::vector<Vertex> vertices, std::vector<Edge> edges, std::vector<Observation> observations,
                     RootPrior prior)
    : vertices_(std::move(vertices)), edges_(std::move(edges)), observations_(std::move(observations)),
      prior_(std::move(prior))
{
    validate();
}

void TreeModel::validate()
{
    const std::size_t n = vertices_.size();
    if (n == 0)
        throw ValidationError("model has no latent vertices");

    std::set<std::string> seen;
    for (const Vertex& v : vertices_) {
        if (!seen.insert(v.id).second)
            throw ValidationError("duplicate vertex id \"" + v.id + "\"");
        if (v.dim == 0)
            throw ValidationError("vertex \"" + v.id + "\" has zero states/dimension");
    }
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        if (e.parent >= n || e.child >= n)
            throw ValidationError("edge " + std::to_string(i) + " references a vertex that does not exist");
        if (e.parent == e.child)
            throw ValidationError("cycle: edge " + std::to_string(i) + " is a self-loop at vertex \"" +
                                  vertices_[e.parent].id + "\"");
    }

    if (const auto cycle = find_cycle(n, edges_); !cycle.empty()) {
        std::vector<std::string> ids;
        for (std::size_t v : cycle)
            ids.push_back(vertices_[v].id);
        throw ValidationError("cycle detected through vertices " + join_ids(ids));
    }

    parent_edge_.assign(n, std::nullopt);
    child_edges_.assign(n, {});
    std::map<std::size_t, std::vector<std::size_t>> parents_of;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        parents_of[edges_[i].child].push_back(edges_[i].parent);
        parent_edge_[edges_[i].child] = i;
        child_edges_[edges_[i].parent].push_back(i);
    }
    for (const auto& [child, parents] : parents_of) {
        if (parents.size() > 1) {
            std::vector<std::string> ids;
            for (std::size_t p : parents)
                ids.push_back(vertices_[p].id);
            throw ValidationError("trees only: vertex \"" + vertices_[child].id + "\" has multiple parents " +
                                  join_ids(ids));
        }
    }

    std::vector<std::size_t> roots;
    for (std::size_t v = 0; v < n; ++v)
        if (!parent_edge_[v])
            roots.push_back(v);
    if (roots.size() != 1) {
        std::vector<std::string> ids;
        for (std::size_t r : roots)
            ids.push_back(vertices_[r].id);
        throw ValidationError("expected exactly one root, found " + std::to_string(roots.size()) +
                              (ids.empty() ? std::string() : ": " + join_ids(ids)));
    }
    root_ = roots.front();

    order_.clear();
    std::deque<std::size_t> queue{root_};
    while (!queue.empty()) {
        const std::size_t v = queue.front();
        queue.pop_front();
        order_.push_back(v);
        for (std::size_t e : child_edges_[v])
            queue.push_back(edges_[e].child);
    }
    if (order_.size() != n)
        throw ValidationError("graph is not connected to the root");

    // Kernels against vertex kinds and dimensions.
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        const Vertex& p = vertices_[e.parent];
        const Vertex& c = vertices_[e.child];
        const std::string where = "edge \"" + p.id + "\" -> \"" + c.id + "\"";
        const auto check_kernel = [&](const Kernel& k, const char* role) {
            const bool finite = is_finite_kind(k);
            const VertexKind want = finite ? VertexKind::finite : VertexKind::gaussian;
            if (p.kind != want || c.kind != want)
                throw ValidationError(where + ": " + role + " kernel of kind " + kernel_kind_name(k) +
                                      " does not match the vertex kinds");
            if (kernel_in_dim(k) != p.dim || kernel_out_dim(k) != c.dim)
                throw ValidationError(where + ": " + role + " kernel maps " + std::to_string(kernel_in_dim(k)) +
                                      " -> " + std::to_string(kernel_out_dim(k)) + ", vertices have " +
                                      std::to_string(p.dim) + " -> " + std::to_string(c.dim));
        };
        check_kernel(e.kernel, "forward");
        if (e.approx) {
            check_kernel(*e.approx, "approximate");
            if (!is_tractable(*e.approx))
                throw ValidationError(where + ": approximate kernel must be tractable (finite, linear_gaussian or "
                                              "linear_sde), got " +
                                      kernel_kind_name(*e.approx));
            const bool sde_edge = std::holds_alternative<SdeEdgeKernel>(e.kernel) ||
                                  std::holds_alternative<LinearSdeKernel>(e.kernel);
            const bool sde_approx = std::holds_alternative<LinearSdeKernel>(*e.approx);
            if (sde_edge != sde_approx)
                throw ValidationError(where + ": SDE edges need a linear_sde approximation and vice versa");
            if (sde_edge) {
                const auto& a = std::get<LinearSdeKernel>(*e.approx);
                double t0 = 0, t1 = 0;
                std::size_t steps = 0;
                if (const auto* s = std::get_if<SdeEdgeKernel>(&e.kernel)) {
                    t0 = s->t0(), t1 = s->t1(), steps = s->steps();
                } else {
                    const auto& l = std::get<LinearSdeKernel>(e.kernel);
                    t0 = l.t0(), t1 = l.t1(), steps = l.steps();
                }
                if (a.t0() != t0 || a.t1() != t1 || a.steps() != steps)
                    throw ValidationError(where + ": approximate SDE must share the forward time grid");
            }
        }
    }

    vertex_obs_.assign(n, {});
    for (std::size_t i = 0; i < observations_.size(); ++i) {
        const Observation& o = observations_[i];
        if (o.vertex >= n)
            throw ValidationError("observation \"" + o.id + "\" references a vertex that does not exist");
        const Vertex& v = vertices_[o.vertex];
        const std::string where = "observation \"" + o.id + "\" on vertex \"" + v.id + "\"";
        if (const auto* fo = std::get_if<FiniteObservation>(&o.kernel)) {
            if (v.kind != VertexKind::finite || fo->states() != v.dim)
                throw ValidationError(where + ": finite observation kernel needs a finite vertex with " +
                                      std::to_string(fo->states()) + " states");
            const auto* label = std::get_if<std::size_t>(&o.value);
            if (label == nullptr || *label >= fo->labels())
                throw ValidationError(where + ": label out of range");
        } else {
            const auto& go = std::get<GaussianObservation>(o.kernel);
            if (v.kind != VertexKind::gaussian || go.state_dim() != v.dim)
                throw ValidationError(where + ": gaussian observation kernel needs a gaussian vertex of dimension " +
                                      std::to_string(go.state_dim()));
            const auto* val = std::get_if<Vector>(&o.value);
            if (val == nullptr || static_cast<std::size_t>(val->size()) != go.obs_dim())
                throw ValidationError(where + ": value must be a real vector of length " +
                                      std::to_string(go.obs_dim()));
            if (!val->allFinite())
                throw ValidationError(where + ": non-finite value");
        }
        vertex_obs_[o.vertex].push_back(i);
    }

    for (std::size_t v = 0; v < n; ++v)
        if (child_edges_[v].empty() && vertex_obs_[v].empty())
            throw ValidationError("leaf vertex \"" + vertices_[v].id + "\" has no observation");

    const Vertex& r = vertices_[root_];
    const std::string where = "prior on root \"" + r.id + "\"";
    if (const auto* fp = std::get_if<FinitePrior>(&prior_)) {
        if (r.kind != VertexKind::finite || static_cast<std::size_t>(fp->weights.size()) != r.dim)
            throw ValidationError(where + ": finite prior needs " + std::to_string(r.dim) + " weights on a finite root");
        if (!is_probability_vector(fp->weights))
            throw ValidationError(where + ": weights must be nonnegative and sum to 1");
    } else if (const auto* gp = std::get_if<GaussianPrior>(&prior_)) {
        if (r.kind != VertexKind::gaussian || static_cast<std::size_t>(gp->mean.size()) != r.dim)
            throw ValidationError(where + ": gaussian prior dimension does not match the root");
        if (gp->cov.rows() != gp->mean.size() || gp->cov.cols() != gp->mean.size())
            throw ValidationError(where + ": covariance has the wrong shape");
        spd_cholesky(gp->cov, "root prior covariance");
    } else {
        const auto& dp = std::get<DiracPrior>(prior_);
        if (r.kind != VertexKind::gaussian || static_cast<std::size_t>(dp.value.size()) != r.dim)
            throw ValidationError(where + ": dirac prior dimension does not match the root");
    }
}

std::size_t TreeModel::vertex_index(const std::string& id) const
{
    for (std::size_t i = 0; i < vertices_.size(); ++i)
        if (vertices_[i].id == id)
            return i;
    throw ValidationError("unknown vertex id \"" + id + "\"");
}

bool TreeModel::all_finite() const
{
    return std::all_of(vertices_.begin(), vertices_.end(),
                       [](const Vertex& v) { return v.kind == VertexKind::finite; });
}

bool TreeModel::has_approximations_where_needed() const
{
    return std::all_of(edges_.begin(), edges_.end(),
                       [](const Edge& e) { return is_tractable(e.kernel) || e.approx.has_value(); });
}

std::size_t TreeModel::latent_leaf_count() const
{
    std::size_t count = 0;
    for (const auto& ce : child_edges_)
        count += ce.empty() ? 1 : 0;
    return count;
}

} // namespace bffg
