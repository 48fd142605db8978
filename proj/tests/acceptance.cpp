#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bffg/backward_ode.hpp"
#include "bffg/bif.hpp"
#include "bffg/compose.hpp"
#include "bffg/guide.hpp"
#include "bffg/infer.hpp"
#include "bffg/model_file.hpp"
#include "bffg/oracle.hpp"
#include "test_models.hpp"

using namespace bffg;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int number, const std::string& name, double limit_seconds, const std::function<Outcome()>& check)
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit_seconds > 0 && seconds >= limit_seconds) {
        o.pass = false;
        o.detail += "; over the time limit";
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", number, name.c_str(),
                o.detail.c_str(), seconds);
    std::fflush(stdout);
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c);
    return buf;
}

const std::string models = BFFG_MODELS_DIR;

Outcome golden_value()
{
    const TreeModel m = testing_models::toy_tree(0.5);
    const double bif = std::exp(exact_likelihood(m));
    const double enumerated = enumerate_likelihood(m).likelihood;
    const double rel = std::max(std::abs(bif - enumerated) / enumerated, std::abs(bif - 0.1125) / 0.1125);
    return {rel <= 1e-12, fmt("L = %.17g, relative error %.3g", bif, rel)};
}

Outcome oracle_sweep()
{
    std::mt19937_64 rng(20260);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        testing_models::RandomTreeOptions opt;
        opt.zero_prob = i % 2 == 0 ? 0.0 : 0.25;
        const TreeModel m = testing_models::random_finite_tree(rng, opt);
        const double bif = std::exp(exact_likelihood(m));
        const double enumerated = enumerate_likelihood(m).likelihood;
        if (enumerated == 0.0) {
            if (bif != 0.0)
                return {false, "nonzero likelihood where enumeration gives 0"};
            continue;
        }
        worst = std::max(worst, std::abs(bif - enumerated) / enumerated);
    }
    return {worst <= 1e-10, fmt("max relative error %.3g over 200 trees", worst)};
}

Outcome exactness()
{
    std::mt19937_64 rng(31337);
    double worst = 0.0;
    std::size_t samples = 0;
    for (int model = 0; model < 20; ++model) {
        const TreeModel m = testing_models::random_finite_tree(rng);
        const BackwardPass pass = backward_filter(m, true);
        for (std::uint64_t i = 0; i < 50; ++i) {
            Rng r = substream(static_cast<std::uint64_t>(model), i);
            const WeightedSample s = forward_guide(m, pass, r);
            if (s.degenerate)
                return {false, "degenerate sample: " + s.degenerate_reason};
            worst = std::max(worst, std::abs(s.log_weight));
            ++samples;
        }
    }
    return {worst <= 1e-12 && samples == 1000, fmt("max |log w| = %.3g over %.0f samples", worst, samples)};
}

Outcome unbiasedness()
{
    const TreeModel m = testing_models::toy_tree(0.5, true);
    const BackwardPass pass = backward_filter(m, true);
    const McLikelihood r = mc_likelihood(m, pass, 100000, 4242);
    const double z = (r.estimate - 0.1125) / r.std_error;
    return {std::abs(z) <= 3.0 && r.std_error > 0.0,
            fmt("estimate %.6f, SE %.2g, z = %.2f", r.estimate, r.std_error, z)};
}

Outcome backward_ode()
{
    LinearCoefficients c;
    c.B = [](double) { return Matrix::Zero(1, 1); };
    c.beta = [](double) { return Vector::Zero(1); };
    c.a = [](double) { return Matrix::Identity(1, 1); };
    c.time_homogeneous = true;
    const GaussianTriplet terminal{0.0, Vector::Ones(1), Matrix::Identity(1, 1)};
    const double riccati = std::abs(backward_ode_solve(terminal, c, 0.5, 1.0, 100).start().H(0, 0) - 2.0 / 3.0);
    const auto err = [&](std::size_t m) {
        return std::abs(backward_ode_solve(terminal, c, 0.0, 0.9, m).start().H(0, 0) - 1.0 / 1.9);
    };
    const double ratio = err(10) / err(20);
    return {riccati <= 1e-8 && ratio >= 8.0, fmt("|H(s) - 2/3| = %.3g, error ratio %.2f", riccati, ratio)};
}

Outcome integrand()
{
    const ModelSpec spec = load_model(models + "/tanh_tree.json");
    const Vector theta = initial_theta(spec);
    const TreeModel m = instantiate(spec, theta);
    const BackwardPass pass = backward_filter(m, true);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int point = 0; point < 100; ++point) {
        const auto e = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 5)(rng));
        const TripletTrajectory& traj = *pass.trajectories[e];
        const auto k = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, static_cast<int>(traj.steps()))(rng));
        const GaussianTriplet& g = traj.triplets[k];
        const auto& fwd = std::get<SdeEdgeKernel>(m.edges()[e].kernel);
        Vector x = Vector::Zero(2);
        for (int i = 0; i < 2; ++i)
            x(i) = 1.5 * u(rng);
        const double t = traj.times[k];
        const Vector b = fwd.drift(t, x);
        // Half of the points use a dispersion that differs from the auxiliary one.
        Matrix s = fwd.dispersion(t, x);
        if (point % 2 == 1)
            s = s * (1.0 + 0.5 * u(rng)) + 0.2 * Matrix::Constant(2, 2, u(rng));
        const Matrix a = s * s.transpose();
        const Vector bt = traj.B[k] * x + traj.beta[k];
        const double closed = guided_log_weight_rate(b, bt, a, traj.a[k], g, x);
        const double fd = generator_fd([&](const Vector& y) { return g(y); }, {b, a, bt, traj.a[k]}, x, 1e-5);
        worst = std::max(worst, std::abs(closed - fd));
    }
    return {worst <= 1e-4, fmt("max |closed form - finite difference| = %.3g over 100 points", worst)};
}

Outcome linear_bridge()
{
    const double B = -0.5, beta = 0.3, sigma = 0.8, T = 1.0, x0 = 0.2, v = 1.0, noise = 0.25;
    const std::size_t M = 200, N = 10000;
    const Matrix Bm = Matrix::Constant(1, 1, B), sm = Matrix::Constant(1, 1, sigma);
    const Vector bv = Vector::Constant(1, beta);
    const SdeEdgeKernel fwd([Bm, bv](double, const Vector& x) { return Vector(Bm * x + bv); },
                            [sm](double, const Vector&) { return sm; }, 1, 1, 0.0, T, M);
    const LinearSdeKernel aux(Bm, bv, sm, 0.0, T, M);
    const std::vector<Vertex> vertices{{"x0", VertexKind::gaussian, 1}, {"xT", VertexKind::gaussian, 1}};
    const TreeModel model(vertices, {Edge{0, 1, fwd, aux}},
                          {Observation{"v", 1, GaussianObservation(Matrix::Identity(1, 1), Matrix::Constant(1, 1, noise)),
                                       Vector::Constant(1, v)}},
                          DiracPrior{Vector::Constant(1, x0)});
    const BackwardPass pass = backward_filter(model, true);

    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        Rng rng = substream(777, i);
        const WeightedSample s = forward_guide(model, pass, rng);
        if (s.degenerate)
            return {false, "degenerate guided sample"};
        const double x = std::get<Vector>(s.values[1])(0);
        const double d = x - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (x - mean);
    }
    const double var = m2 / static_cast<double>(N - 1);

    const double e = std::exp(B * T);
    const double prior_mean = e * x0 + beta * (e - 1.0) / B;
    const double prior_var = sigma * sigma * (e * e - 1.0) / (2.0 * B);
    const double gain = prior_var / (prior_var + noise);
    const double post_mean = prior_mean + gain * (v - prior_mean);
    const double post_var = (1.0 - gain) * prior_var;

    const double z_mean = (mean - post_mean) / std::sqrt(post_var / static_cast<double>(N));
    const double z_var = (var - post_var) / (post_var * std::sqrt(2.0 / static_cast<double>(N - 1)));
    return {std::abs(z_mean) <= 3.0 && std::abs(z_var) <= 3.0,
            fmt("mean z = %.2f, variance z = %.2f (Kalman variance %.4f)", z_mean, z_var, post_var)};
}

Vector point_mass(Eigen::Index n, Eigen::Index x)
{
    Vector v = Vector::Zero(n);
    v(x) = 1.0;
    return v;
}

Vector kron(const Vector& a, const Vector& b)
{
    Vector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

const Vector& weights(const MassMeasure& m, std::size_t i = 0) { return std::get<FiniteMeasure>(m.factors[i]).weights; }

Vector positive_h(std::mt19937_64& rng, int n)
{
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i)
        v(i) = u(rng);
    return v;
}

// Every map {0,1,2} -> {0,1,2} as a 0/1 kernel.
std::vector<Matrix> deterministic_kernels()
{
    std::vector<Matrix> out;
    for (int code = 0; code < 27; ++code) {
        Matrix k = Matrix::Zero(3, 3);
        int c = code;
        for (int x = 0; x < 3; ++x, c /= 3)
            k(x, c % 3) = 1.0;
        out.push_back(k);
    }
    return out;
}

double serial_gap(const FiniteKernel& k1, const FiniteKernel& k2, const FiniteKernel& t1, const FiniteKernel& t2,
                  const Vector& h)
{
    const Lens composed = lens_serial(Lens::primitive(k1, t1, "a"), Lens::primitive(k2, t2, "b"));
    const Lens direct = Lens::primitive(compose_serial(k1, k2), compose_serial(t1, t2), "ab");
    const LensBackward bc = composed.backward({FiniteH::from_values(h)});
    const LensBackward bd = direct.backward({FiniteH::from_values(h)});
    double gap = (std::get<FiniteH>(bc.h[0]).represented() - std::get<FiniteH>(bd.h[0]).represented()).cwiseAbs().maxCoeff();
    for (int x = 0; x < 3; ++x) {
        const MassMeasure in = MassMeasure::single(FiniteMeasure{point_mass(3, x)});
        const MassMeasure oc = composed.forward(bc.messages, in);
        const MassMeasure od = direct.forward(bd.messages, in);
        gap = std::max(gap, std::abs(oc.mass - od.mass));
        if (oc.degenerate != od.degenerate)
            return INFINITY;
        if (!oc.degenerate)
            gap = std::max(gap, (oc.mass * weights(oc) - od.mass * weights(od)).cwiseAbs().maxCoeff());
    }
    return gap;
}

Outcome lens_laws()
{
    std::mt19937_64 rng(8080);
    using testing_models::random_stochastic;
    double serial = 0.0;
    std::size_t serial_cases = 0;
    const std::vector<Matrix> det = deterministic_kernels();
    for (const Matrix& a : det) {
        for (const Matrix& b : det) {
            const FiniteKernel t1(random_stochastic(rng, 3, 3)), t2(random_stochastic(rng, 3, 3));
            serial = std::max(serial, serial_gap(FiniteKernel(a), FiniteKernel(b), t1, t2, positive_h(rng, 3)));
            ++serial_cases;
        }
    }
    for (int trial = 0; trial < 200; ++trial) {
        const FiniteKernel k1(random_stochastic(rng, 3, 3)), k2(random_stochastic(rng, 3, 3));
        const FiniteKernel t1(random_stochastic(rng, 3, 3)), t2(random_stochastic(rng, 3, 3));
        serial = std::max(serial, serial_gap(k1, k2, t1, t2, positive_h(rng, 3)));
        ++serial_cases;
    }

    double parallel = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const FiniteKernel k1(random_stochastic(rng, 2, 2)), k2(random_stochastic(rng, 2, 2));
        const FiniteKernel t1(random_stochastic(rng, 2, 2)), t2(random_stochastic(rng, 2, 2));
        const Lens par = lens_parallel(Lens::primitive(k1, t1, "a"), Lens::primitive(k2, t2, "b"));
        const Lens prod = Lens::primitive(compose_parallel(k1, k2), compose_parallel(t1, t2), "ab");
        const Vector h1 = positive_h(rng, 2), h2 = positive_h(rng, 2);
        const LensBackward bp = par.backward({FiniteH::from_values(h1), FiniteH::from_values(h2)});
        const LensBackward bk = prod.backward({FiniteH::from_values(kron(h1, h2))});
        const Vector joint = kron(std::get<FiniteH>(bp.h[0]).represented(), std::get<FiniteH>(bp.h[1]).represented());
        parallel = std::max(parallel, (joint - std::get<FiniteH>(bk.h[0]).represented()).cwiseAbs().maxCoeff());
        for (int x1 = 0; x1 < 2; ++x1) {
            for (int x2 = 0; x2 < 2; ++x2) {
                MassMeasure in;
                in.factors = {FiniteMeasure{point_mass(2, x1)}, FiniteMeasure{point_mass(2, x2)}};
                const MassMeasure op = par.forward(bp.messages, in);
                const MassMeasure ok =
                    prod.forward(bk.messages, MassMeasure::single(FiniteMeasure{point_mass(4, 2 * x1 + x2)}));
                parallel = std::max(parallel, std::abs(op.mass - ok.mass));
                parallel = std::max(parallel, (kron(weights(op, 0), weights(op, 1)) - weights(ok)).cwiseAbs().maxCoeff());
            }
        }
    }
    return {serial <= 1e-10 && parallel <= 1e-10,
            fmt("serial gap %.3g over %.0f kernel pairs, parallel gap %.3g", serial, static_cast<double>(serial_cases),
                parallel)};
}

// Posterior mean of theta on [0, 1] under a flat prior by composite Simpson quadrature.
double quadrature_posterior_mean(const ModelBuilder& build)
{
    const int n = 2000;
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const double l = enumerate_likelihood(build(Vector::Constant(1, t))).likelihood;
        num += w * t * l;
        den += w * l;
    }
    return num / den;
}

// Standard error of the mean of a correlated series by non-overlapping batch means.
double batch_means_se(const std::vector<double>& x, std::size_t batches)
{
    const std::size_t len = x.size() / batches;
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i)
            s += x[i];
        means.push_back(s / static_cast<double>(len));
    }
    double mean = 0.0;
    for (double m : means)
        mean += m / static_cast<double>(batches);
    double var = 0.0;
    for (double m : means)
        var += (m - mean) * (m - mean) / static_cast<double>(batches - 1);
    return std::sqrt(var / static_cast<double>(batches));
}

Outcome mcmc_toy()
{
    const ModelSpec spec = load_model(models + "/toy_tree_uniform_approx.json");
    const ModelBuilder build = model_builder(spec);
    const double target = quadrature_posterior_mean(build);

    McmcConfig config;
    config.iterations = 10000;
    config.seed = 909;
    const McmcResult r = mcmc_run(build, param_space(spec), config);
    const std::size_t burn = 500;
    std::vector<double> chain;
    for (std::size_t i = burn; i < r.trace.size(); ++i)
        chain.push_back(r.trace[i].theta(0));
    double mean = 0.0;
    for (double v : chain)
        mean += v / static_cast<double>(chain.size());
    const double se = batch_means_se(chain, 50);
    const double z = (mean - target) / se;
    return {std::abs(z) <= 3.0, fmt("chain mean %.4f, quadrature %.4f, z = %.2f", mean, target, z)};
}

double quantile(std::vector<double> v, double p)
{
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Outcome tanh_surrogate()
{
    ModelSpec spec = load_model(models + "/tanh_tree.json");
    const ParamSpace box = param_space(spec);
    const Vector truth = initial_theta(spec);
    Vector start(4);
    start << 1.5, 1.5, 0.5, 0.5;
    const std::size_t iterations = 10000, burn = 1000, replications = 10;

    const std::size_t p = box.size();
    std::vector<int> covered(p, 0);
    bool in_box = true;
    bool rates_ok = true;
    std::string rates;
    for (std::size_t rep = 0; rep < replications; ++rep) {
        Rng data_rng = substream(5150, rep);
        const PriorDraw draw = forward_simulate(instantiate(spec, truth), data_rng);
        for (std::size_t o = 0; o < spec.observations.size(); ++o) {
            const Vector& y = std::get<Vector>(draw.observations[o]);
            spec.observations[o].value = std::vector<double>(y.data(), y.data() + y.size());
        }
        ParamSpace space = box;
        space.theta = start;
        McmcConfig config;
        config.iterations = iterations;
        config.seed = 6000 + rep;
        const McmcResult r = mcmc_run(model_builder(spec), space, config);

        const double path_rate = r.path_acceptance_rate();
        rates_ok = rates_ok && path_rate > 0.05 && path_rate < 0.95;
        double lo_rate = path_rate, hi_rate = path_rate;
        for (std::size_t j = 0; j < p; ++j) {
            const double a = r.theta_acceptance_rate(j);
            rates_ok = rates_ok && a > 0.05 && a < 0.95;
            lo_rate = std::min(lo_rate, a);
            hi_rate = std::max(hi_rate, a);
            std::vector<double> chain;
            for (std::size_t i = burn; i < r.trace.size(); ++i)
                chain.push_back(r.trace[i].theta(static_cast<Eigen::Index>(j)));
            for (const TraceRow& row : r.trace)
                in_box = in_box && box.contains(row.theta);
            const double lo = quantile(chain, 0.05), hi = quantile(chain, 0.95);
            covered[j] += (truth(static_cast<Eigen::Index>(j)) >= lo && truth(static_cast<Eigen::Index>(j)) <= hi) ? 1 : 0;
        }
        std::printf("  replication %zu: acceptance rates in [%.3f, %.3f]\n", rep, lo_rate, hi_rate);
        std::fflush(stdout);
    }
    bool coverage_ok = true;
    std::string detail = "coverage";
    for (std::size_t j = 0; j < p; ++j) {
        coverage_ok = coverage_ok && covered[j] >= 8;
        detail += " " + box.names[j] + " " + std::to_string(covered[j]) + "/10";
    }
    detail += in_box ? ", chains inside the box" : ", chain left the box";
    detail += rates_ok ? ", acceptance rates in (0.05, 0.95)" : ", acceptance rate out of range";
    return {coverage_ok && in_box && rates_ok, detail};
}

} // namespace

int main()
{
    report(1, "example tree likelihood", 1.0, golden_value);
    report(2, "random trees against enumeration", 30.0, oracle_sweep);
    report(3, "exact backward kernels give zero log-weights", 0.0, exactness);
    report(4, "Monte Carlo likelihood with uniform backward kernels", 30.0, unbiasedness);
    report(5, "backward ODE solution and order", 0.0, backward_ode);
    report(6, "log-weight integrand against finite differences", 0.0, integrand);
    report(7, "guided linear SDE against Kalman moments", 60.0, linear_bridge);
    report(8, "serial and parallel lens laws", 0.0, lens_laws);
    report(9, "MCMC on the example tree", 120.0, mcmc_toy);
    report(10, "tanh-drift tree calibration", 600.0, tanh_surrogate);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
