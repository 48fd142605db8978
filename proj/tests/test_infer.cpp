#include <cmath>
#include <random>

#include "doctest.h"

#include "bffg/bif.hpp"
#include "bffg/errors.hpp"
#include "bffg/infer.hpp"
#include "bffg/oracle.hpp"
#include "test_models.hpp"

using namespace bffg;

namespace {

ModelBuilder toy_builder(bool approx)
{
    return [approx](const Vector& t) { return testing_models::toy_tree(t(0), approx); };
}

ParamSpace toy_space(double start = 0.5, double step = 0.25)
{
    ParamSpace s;
    s.names = {"theta"};
    s.theta = Vector::Constant(1, start);
    s.lower = Vector::Constant(1, 0.0);
    s.upper = Vector::Constant(1, 1.0);
    s.step = Vector::Constant(1, step);
    return s;
}

ParamSpace empty_space()
{
    ParamSpace s;
    s.theta = Vector(0);
    s.lower = Vector(0);
    s.upper = Vector(0);
    s.step = Vector(0);
    return s;
}

} // namespace

TEST_SUITE("infer")
{
    TEST_CASE("likelihood scan")
    {
        const auto rows = likelihood_scan(toy_builder(false), {Vector::Constant(1, 0.5)});
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].log_likelihood == doctest::Approx(std::log(0.1125)).epsilon(1e-14));
        std::vector<Vector> grid;
        for (int i = 0; i <= 10; ++i)
            grid.push_back(Vector::Constant(1, 0.1 * i));
        const auto many = likelihood_scan(toy_builder(false), grid);
        CHECK(many.size() == 11);
        for (const auto& r : many)
            CHECK(std::abs(std::exp(r.log_likelihood) - enumerate_likelihood(testing_models::toy_tree(r.theta(0))).likelihood) < 1e-15);
    }

    TEST_CASE("reflection stays in the box and is an involution inside it")
    {
        std::mt19937_64 rng(4);
        std::normal_distribution<double> n(0.0, 3.0);
        for (int i = 0; i < 1000; ++i) {
            const double v = reflect_into(0.5 + n(rng), 0.0, 1.0);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(reflect_into(-0.2, 0.0, 1.0) == doctest::Approx(0.2));
        CHECK(reflect_into(1.3, 0.0, 1.0) == doctest::Approx(0.7));
        CHECK(reflect_into(0.4, 0.0, 1.0) == 0.4);
    }

    TEST_CASE("Monte Carlo likelihood with exact backward kernels has zero error")
    {
        const TreeModel m = testing_models::toy_tree(0.5);
        const McLikelihood r = mc_likelihood(m, backward_filter(m, false), 100, 1);
        CHECK(r.estimate == doctest::Approx(0.1125).epsilon(1e-14));
        CHECK(r.std_error == 0.0);
        CHECK(r.degenerate == 0);
    }

    TEST_CASE("Monte Carlo likelihood for impossible observations is zero")
    {
        std::vector<Vertex> v{{"a", VertexKind::finite, 2}, {"b", VertexKind::finite, 2}};
        Matrix lam(2, 2);
        lam << 1, 0, 1, 0;
        const TreeModel m(v, {Edge{0, 1, FiniteKernel::identity(2), FiniteKernel(testing_models::uniform_rows(2, 2))}},
                          {Observation{"o", 1, FiniteObservation(lam), std::size_t{1}}},
                          FinitePrior{Vector::Constant(2, 0.5)});
        const McLikelihood r = mc_likelihood(m, backward_filter(m, true), 10, 1);
        CHECK(r.estimate == 0.0);
        CHECK(r.degenerate == 10);
    }

    TEST_CASE("Monte Carlo likelihood is thread-count invariant and its error shrinks like one over root N")
    {
        const TreeModel m = testing_models::toy_tree(0.5, true);
        const BackwardPass pass = backward_filter(m, true);
        const McLikelihood a = mc_likelihood(m, pass, 2000, 9, 1);
        const McLikelihood b = mc_likelihood(m, pass, 2000, 9, 3);
        CHECK(a.estimate == b.estimate);
        CHECK(a.std_error == b.std_error);
        const McLikelihood small = mc_likelihood(m, pass, 10000, 10);
        const McLikelihood large = mc_likelihood(m, pass, 40000, 11);
        const double ratio = small.std_error / large.std_error;
        CHECK(ratio > 1.8);
        CHECK(ratio < 2.2);
        CHECK(std::abs(large.estimate - 0.1125) < 3.0 * large.std_error);
    }

    TEST_CASE("zero iterations give an empty trace")
    {
        McmcConfig c;
        c.iterations = 0;
        c.seed = 1;
        const McmcResult r = mcmc_run(toy_builder(false), toy_space(), c);
        CHECK(r.trace.empty());
        CHECK(r.final_state.theta(0) == 0.5);
    }

    TEST_CASE("exact path proposals are always accepted")
    {
        McmcConfig c;
        c.iterations = 300;
        c.seed = 2;
        const McmcResult r = mcmc_run(toy_builder(false), toy_space(), c);
        CHECK(r.path_accepts == 300);
        for (const TraceRow& row : r.trace) {
            CHECK(row.theta(0) >= 0.0);
            CHECK(row.theta(0) <= 1.0);
        }
        CHECK(r.theta_acceptance_rate(0) > 0.0);
        CHECK(r.theta_acceptance_rate(0) < 1.0);
    }

    TEST_CASE("identical seeds give identical traces")
    {
        McmcConfig c;
        c.iterations = 200;
        c.seed = 3;
        c.use_approx = true;
        const McmcResult a = mcmc_run(toy_builder(true), toy_space(), c);
        const McmcResult b = mcmc_run(toy_builder(true), toy_space(), c);
        REQUIRE(a.trace.size() == b.trace.size());
        for (std::size_t i = 0; i < a.trace.size(); ++i) {
            CHECK(a.trace[i].theta(0) == b.trace[i].theta(0));
            CHECK(a.trace[i].log_what == b.trace[i].log_what);
            CHECK(a.trace[i].path_accepted == b.trace[i].path_accepted);
        }
        c.seed = 4;
        const McmcResult d = mcmc_run(toy_builder(true), toy_space(), c);
        bool differs = false;
        for (std::size_t i = 0; i < a.trace.size(); ++i)
            differs = differs || a.trace[i].theta(0) != d.trace[i].theta(0);
        CHECK(differs);
    }

    TEST_CASE("exact path sampling reproduces the smoothing marginals")
    {
        const TreeModel m = testing_models::toy_tree(0.5);
        const EnumerationResult e = enumerate_likelihood(m);
        const std::size_t iters = 10000;
        std::vector<Vector> counts(m.vertices().size());
        for (std::size_t v = 0; v < counts.size(); ++v)
            counts[v] = Vector::Zero(static_cast<Eigen::Index>(m.vertices()[v].dim));
        McmcConfig c;
        c.iterations = iters;
        c.seed = 5;
        c.observer = [&](const McmcState& s) {
            for (std::size_t v = 0; v < counts.size(); ++v)
                counts[v](static_cast<Eigen::Index>(std::get<std::size_t>(s.sample.values[v]))) += 1.0;
        };
        mcmc_run([](const Vector&) { return testing_models::toy_tree(0.5); }, empty_space(), c);
        for (std::size_t v = 0; v < counts.size(); ++v) {
            for (Eigen::Index x = 0; x < counts[v].size(); ++x) {
                const double p = e.marginals[v](x);
                const double freq = counts[v](x) / static_cast<double>(iters);
                const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / static_cast<double>(iters));
                CHECK(std::abs(freq - p) <= 3.0 * se + 1e-12);
            }
        }
    }

    TEST_CASE("stall is reported when no proposal can succeed")
    {
        std::vector<Vertex> v{{"a", VertexKind::finite, 2}, {"b", VertexKind::finite, 2}};
        Matrix lam(2, 2);
        lam << 1, 0, 1, 0;
        const ModelBuilder build = [&](const Vector&) {
            return TreeModel(v, {Edge{0, 1, FiniteKernel::identity(2), FiniteKernel(testing_models::uniform_rows(2, 2))}},
                             {Observation{"o", 1, FiniteObservation(lam), std::size_t{1}}},
                             FinitePrior{Vector::Constant(2, 0.5)});
        };
        McmcConfig c;
        c.iterations = 10;
        c.seed = 1;
        c.max_stall = 5;
        CHECK_THROWS_AS(mcmc_run(build, empty_space(), c), StallError);
    }

    TEST_CASE("parameter space validation")
    {
        ParamSpace s = toy_space();
        s.theta(0) = 2.0;
        CHECK_THROWS_AS(s.validate(), ValidationError);
        s = toy_space();
        s.step(0) = 0.0;
        CHECK_THROWS_AS(s.validate(), ValidationError);
        CHECK(toy_space().contains(Vector::Constant(1, 1.0)));
    }
}
