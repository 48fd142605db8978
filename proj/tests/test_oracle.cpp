#include <cmath>
#include <random>

#include "doctest.h"

#include "bffg/errors.hpp"
#include "bffg/oracle.hpp"
#include "test_models.hpp"

using namespace bffg;

TEST_SUITE("oracle")
{
    TEST_CASE("enumeration on the example tree")
    {
        const EnumerationResult r = enumerate_likelihood(testing_models::toy_tree(0.5));
        CHECK(r.likelihood == doctest::Approx(0.1125).epsilon(1e-14));
        CHECK(r.configurations == 243);
        // Hand product at the root: one third of sum_x (kappa^2 h2)(x) (kappa h3)(x).
        const Matrix K = testing_models::toy_kappa(0.5);
        Vector h2(3), obs3(3);
        h2 << 0, 0, 1;
        obs3 << 1, 1, 0;
        const Vector left = K * (K * h2);
        const Vector right = K * (obs3.cwiseProduct(K * obs3));
        CHECK(r.likelihood == doctest::Approx(left.cwiseProduct(right).sum() / 3.0).epsilon(1e-14));
    }

    TEST_CASE("marginals are probability vectors")
    {
        std::mt19937_64 rng(6);
        for (int trial = 0; trial < 20; ++trial) {
            const EnumerationResult r = enumerate_likelihood(testing_models::random_finite_tree(rng));
            for (const Vector& m : r.marginals)
                CHECK(std::abs(m.sum() - 1.0) < 1e-12);
        }
    }

    TEST_CASE("single vertex and deterministic kernels")
    {
        std::vector<Vertex> one{{"a", VertexKind::finite, 3}};
        Matrix lam(3, 2);
        lam << 0.9, 0.1, 0.5, 0.5, 0.2, 0.8;
        Vector prior(3);
        prior << 0.2, 0.3, 0.5;
        const TreeModel single(one, {}, {Observation{"o", 0, FiniteObservation(lam), std::size_t{1}}},
                               FinitePrior{prior});
        CHECK(enumerate_likelihood(single).likelihood == doctest::Approx(0.2 * 0.1 + 0.3 * 0.5 + 0.5 * 0.8));

        std::vector<Vertex> two{{"a", VertexKind::finite, 2}, {"b", VertexKind::finite, 2}};
        Matrix swap(2, 2);
        swap << 0, 1, 1, 0;
        const TreeModel det(two, {Edge{0, 1, FiniteKernel(swap), std::nullopt}},
                            {Observation{"o", 1, FiniteObservation(Matrix::Identity(2, 2)), std::size_t{0}}},
                            FinitePrior{Vector::Constant(2, 0.5)});
        const EnumerationResult r = enumerate_likelihood(det);
        CHECK(r.likelihood == 0.5);
        CHECK(r.marginals[0](1) == 1.0);
    }

    TEST_CASE("configuration cap")
    {
        CHECK_THROWS_AS(enumerate_likelihood(testing_models::toy_tree(0.5), 100), ValidationError);
    }

    TEST_CASE("quadrature against a Gaussian integrand")
    {
        const KernelDensity1d k = linear_gaussian_density_1d(1.0, 0.0, 1.0);
        const auto v = quadrature_pullback_1d(k, [](double y) { return std::exp(-0.5 * y * y); }, {0.0, 2.0});
        CHECK(std::abs(v[0] - 1.0 / std::sqrt(2.0)) < 1e-9);
        CHECK(std::abs(v[1] - std::exp(-1.0) / std::sqrt(2.0)) < 1e-9);
        CHECK(std::abs(v[0] - 0.70711) < 1e-5);
        CHECK(std::abs(v[1] - 0.26014) < 1e-5);
        const auto ones = quadrature_pullback_1d(k, [](double) { return 1.0; }, {-3.0, 0.5, 4.0});
        for (double o : ones)
            CHECK(std::abs(o - 1.0) < 1e-9);
    }

    TEST_CASE("finite-difference generator")
    {
        const auto g = [](const Vector& x) { return std::exp(-0.5 * x.squaredNorm()); };
        const Vector x = Vector::Constant(1, 1.0);
        const Matrix one = Matrix::Identity(1, 1);
        CHECK(std::abs(generator_fd(g, {Vector::Constant(1, 0.3), one, Vector::Constant(1, 0.3), one}, x, 1e-4)) < 1e-6);
        CHECK(std::abs(generator_fd(g, {Vector::Constant(1, 1.0), one, Vector::Zero(1), one}, x, 1e-4) + 1.0) < 1e-4);

        // For g = 1 + x'Qx / 2 the Hessian is Q exactly, up to rounding.
        Matrix Q(2, 2);
        Q << 2.0, 0.5, 0.5, 1.0;
        const auto quad = [&](const Vector& y) { return 1.0 + 0.5 * y.dot(Q * y); };
        const Vector y = Vector::Zero(2);
        const double got = generator_fd(quad, {Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Zero(2, 2)}, y, 1e-3);
        CHECK(std::abs(got - 0.5 * Q.trace()) < 1e-6);
        CHECK_THROWS_AS(generator_fd(quad, {Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Zero(2, 2)}, y, 0.0),
                        ValidationError);
    }

    TEST_CASE("oracles need finite models")
    {
        std::vector<Vertex> v{{"a", VertexKind::gaussian, 1}};
        const TreeModel m(v, {}, {Observation{"o", 0, GaussianObservation(Matrix::Identity(1, 1), Matrix::Identity(1, 1)), Vector::Zero(1)}},
                          DiracPrior{Vector::Zero(1)});
        CHECK_THROWS_AS(enumerate_likelihood(m), UnsupportedError);
    }
}
