#include <cmath>
#include <random>

#include "doctest.h"

#include "bffg/errors.hpp"
#include "bffg/kernel.hpp"
#include "bffg/oracle.hpp"
#include "test_models.hpp"

using namespace bffg;
using testing_models::random_stochastic;
using testing_models::toy_kappa;

TEST_SUITE("kernel")
{
    TEST_CASE("finite pullback of the example matrix")
    {
        Vector h(3);
        h << 0, 0, 1;
        const FiniteH p = pullback(FiniteKernel(toy_kappa(0.5)), FiniteH::from_values(h));
        const Vector r = p.represented();
        CHECK(r(0) == 0.0);
        CHECK(r(1) == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(r(2) == doctest::Approx(0.3).epsilon(1e-15));
    }

    TEST_CASE("Markov kernels fix the constant function")
    {
        std::mt19937_64 rng(3);
        const FiniteKernel k(random_stochastic(rng, 4, 3));
        const FiniteH p = pullback(k, FiniteH::ones(3));
        CHECK((p.represented() - Vector::Ones(4)).cwiseAbs().maxCoeff() < 1e-15);
    }

    TEST_CASE("finite pushforward reads off the first row")
    {
        Vector mu(3);
        mu << 1, 0, 0;
        const FiniteMeasure nu = pushforward(FiniteKernel(toy_kappa(0.5)), FiniteMeasure{mu});
        CHECK(nu.weights(0) == 0.5);
        CHECK(nu.weights(1) == 0.5);
        CHECK(nu.weights(2) == 0.0);
    }

    TEST_CASE("invalid finite kernels are rejected")
    {
        Matrix bad(2, 2);
        bad << 0.5, 0.6, 0.5, 0.5;
        CHECK_THROWS_AS(FiniteKernel{bad}, ValidationError);
        bad << -0.1, 1.1, 0.5, 0.5;
        CHECK_THROWS_AS(FiniteKernel(bad, false), ValidationError);
        Matrix ok(2, 2);
        ok << 0.5, 0.6, 0.5, 0.5;
        CHECK_NOTHROW(FiniteKernel(ok, false));
    }

    TEST_CASE("serial composition agrees with sequential pullback")
    {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            const FiniteKernel k1(random_stochastic(rng, 3, 4));
            const FiniteKernel k2(random_stochastic(rng, 4, 2));
            Vector h(2);
            h << u(rng), u(rng);
            const FiniteH hh = FiniteH::from_values(h);
            const Vector a = pullback(compose_serial(k1, k2), hh).represented();
            const Vector b = pullback(k1, pullback(k2, hh)).represented();
            CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    TEST_CASE("parallel composition is the Kronecker product")
    {
        Matrix half(2, 2);
        half << 0.5, 0.5, 0.5, 0.5;
        const FiniteKernel k = compose_parallel(FiniteKernel::identity(2), FiniteKernel(half));
        Vector expect(4);
        expect << 0.5, 0.5, 0, 0;
        CHECK((k.matrix().row(0).transpose() - expect).cwiseAbs().maxCoeff() == 0.0);
        CHECK(k.in_states() == 4);
    }

    TEST_CASE("Gaussian pullback agrees with quadrature")
    {
        const double B = 0.8, beta = -0.3, gamma = 0.6;
        const LinearGaussianKernel k(Matrix::Constant(1, 1, B), Vector::Constant(1, beta), Matrix::Constant(1, 1, gamma));
        const GaussianTriplet h{0.4, Vector::Constant(1, 0.9), Matrix::Constant(1, 1, 1.3)};
        const GaussianTriplet p = pullback(k, h);
        const std::vector<double> xs{-2, -1, 0, 1, 2};
        const auto q = quadrature_pullback_1d(linear_gaussian_density_1d(B, beta, gamma),
                                              [&](double y) { return h(Vector::Constant(1, y)); }, xs);
        for (std::size_t i = 0; i < xs.size(); ++i)
            CHECK(p(Vector::Constant(1, xs[i])) == doctest::Approx(q[i]).epsilon(1e-6));
    }

    TEST_CASE("linear Gaussian serial composition agrees with sequential pullback")
    {
        Matrix B1(2, 2), B2(1, 2), G1(2, 2), G2(1, 1);
        B1 << 0.9, 0.1, -0.2, 1.1;
        B2 << 1.0, -0.5;
        G1 << 0.5, 0.1, 0.1, 0.4;
        G2 << 0.3;
        const LinearGaussianKernel k1(B1, Vector::Constant(2, 0.2), G1);
        const LinearGaussianKernel k2(B2, Vector::Constant(1, -0.1), G2);
        const GaussianTriplet h{0.1, Vector::Constant(1, 0.7), Matrix::Constant(1, 1, 2.0)};
        const GaussianTriplet a = pullback(compose_serial(k1, k2), h);
        const GaussianTriplet b = pullback(k1, pullback(k2, h));
        CHECK(std::abs(a.c - b.c) < 1e-12);
        CHECK((a.F - b.F).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((a.H - b.H).cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("linear Gaussian pushforward moments")
    {
        const LinearGaussianKernel k(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 0.5));
        const GaussianMeasure out = pushforward(k, GaussianMeasure{Vector::Constant(1, 3.0), Matrix::Constant(1, 1, 0.25), 1.0});
        CHECK(out.mean(0) == 7.0);
        CHECK(out.cov(0, 0) == doctest::Approx(1.5));
    }

    TEST_CASE("composition across kinds is rejected")
    {
        const Kernel a = FiniteKernel::identity(2);
        const Kernel b = LinearGaussianKernel(Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Identity(1, 1));
        CHECK_THROWS(compose_serial(a, b));
        CHECK_THROWS(compose_parallel(a, b));
    }

    TEST_CASE("intractable kernels have no pullback")
    {
        const Kernel k = NonlinearGaussianKernel([](const Vector& x) { return Vector(x.array().sin()); },
                                                 Matrix::Identity(1, 1), 1);
        CHECK_FALSE(is_tractable(k));
        CHECK_THROWS_AS(pullback(k, HFun{GaussianTriplet::ones(1)}), UnsupportedError);
    }
}
