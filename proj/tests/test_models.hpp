#ifndef BFFG_TEST_MODELS_HPP
#define BFFG_TEST_MODELS_HPP

#include <random>
#include <string>
#include <vector>

#include "bffg/tree.hpp"

namespace testing_models {

using bffg::Matrix;
using bffg::Vector;

inline Matrix toy_kappa(double theta)
{
    Matrix k(3, 3);
    k << 1.0 - theta, theta, 0.0, 0.25, 0.5, 0.25, 0.4, 0.3, 0.3;
    return k;
}

inline Matrix toy_lambda()
{
    Matrix l(3, 2);
    l << 1, 0, 1, 0, 0, 1;
    return l;
}

inline Matrix uniform_rows(int rows, int cols) { return Matrix::Constant(rows, cols, 1.0 / cols); }

/// The six-vertex example tree: -1 -> 0 (uniform), 0 -> 1 -> 2, 0 -> 3 -> 4, with
/// observations v1 at 4, v2 at 3 (both label 0) and v3 at 2 (label 1).
inline bffg::TreeModel toy_tree(double theta, bool uniform_approx = false)
{
    using namespace bffg;
    std::vector<Vertex> vertices{{"-1", VertexKind::finite, 1}};
    for (int i = 0; i < 5; ++i)
        vertices.push_back({std::to_string(i), VertexKind::finite, 3});
    std::vector<Edge> edges;
    edges.push_back({0, 1, FiniteKernel(uniform_rows(1, 3)), std::nullopt});
    for (auto [p, c] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 2}, {2, 3}, {1, 4}, {4, 5}}) {
        Edge e{p, c, FiniteKernel(toy_kappa(theta)), std::nullopt};
        if (uniform_approx)
            e.approx = FiniteKernel(uniform_rows(3, 3));
        edges.push_back(std::move(e));
    }
    std::vector<Observation> obs{{"v1", 5, FiniteObservation(toy_lambda()), std::size_t{0}},
                                 {"v2", 4, FiniteObservation(toy_lambda()), std::size_t{0}},
                                 {"v3", 3, FiniteObservation(toy_lambda()), std::size_t{1}}};
    return TreeModel(std::move(vertices), std::move(edges), std::move(obs), FinitePrior{Vector::Ones(1)});
}

inline Matrix random_stochastic(std::mt19937_64& rng, int rows, int cols, double zero_prob = 0.0)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        do {
            for (int j = 0; j < cols; ++j)
                m(i, j) = u(rng) < zero_prob ? 0.0 : u(rng) + 1e-3;
        } while (m.row(i).sum() == 0.0);
        m.row(i) /= m.row(i).sum();
    }
    return m;
}

struct RandomTreeOptions {
    int max_vertices = 6;
    int max_states = 4;
    bool random_approx = false;
    double zero_prob = 0.0;
};

/// Random finite tree with random stochastic kernels; every leaf is observed and
/// internal vertices are observed with probability 0.3.
inline bffg::TreeModel random_finite_tree(std::mt19937_64& rng, const RandomTreeOptions& opt = {})
{
    using namespace bffg;
    std::uniform_int_distribution<int> nv(1, opt.max_vertices);
    std::uniform_int_distribution<int> ns(1, opt.max_states);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = nv(rng);
    std::vector<Vertex> vertices;
    for (int i = 0; i < n; ++i)
        vertices.push_back({"x" + std::to_string(i), VertexKind::finite, static_cast<std::size_t>(ns(rng))});
    std::vector<Edge> edges;
    std::vector<bool> has_child(n, false);
    for (int i = 1; i < n; ++i) {
        const int p = std::uniform_int_distribution<int>(0, i - 1)(rng);
        has_child[p] = true;
        const int rp = static_cast<int>(vertices[p].dim);
        const int rc = static_cast<int>(vertices[i].dim);
        Edge e{static_cast<std::size_t>(p), static_cast<std::size_t>(i),
               FiniteKernel(random_stochastic(rng, rp, rc, opt.zero_prob)), std::nullopt};
        if (opt.random_approx)
            e.approx = FiniteKernel(random_stochastic(rng, rp, rc));
        edges.push_back(std::move(e));
    }
    std::vector<Observation> obs;
    for (int i = 0; i < n; ++i) {
        if (has_child[i] && u(rng) >= 0.3)
            continue;
        const int labels = std::uniform_int_distribution<int>(1, 3)(rng);
        const Matrix lambda = random_stochastic(rng, static_cast<int>(vertices[i].dim), labels, opt.zero_prob);
        const auto value = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, labels - 1)(rng));
        obs.push_back({"o" + std::to_string(i), static_cast<std::size_t>(i), FiniteObservation(lambda), value});
    }
    const Matrix prior = random_stochastic(rng, 1, static_cast<int>(vertices[0].dim));
    return TreeModel(std::move(vertices), std::move(edges), std::move(obs), FinitePrior{prior.row(0).transpose()});
}

} // namespace testing_models

#endif // BFFG_TEST_MODELS_HPP
