#include "bffg/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "bffg/errors.hpp"

namespace bffg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

} // namespace

bool ParamSpace::contains(const Vector& t) const
{
    if (t.size() != lower.size())
        return false;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (!(t(i) >= lower(i) && t(i) <= upper(i)))
            return false;
    }
    return true;
}

void ParamSpace::validate() const
{
    const auto n = theta.size();
    if (lower.size() != n || upper.size() != n || step.size() != n ||
        (!names.empty() && names.size() != static_cast<std::size_t>(n)))
        throw ValidationError("parameter space: inconsistent sizes");
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string name = names.empty() ? std::to_string(i) : names[static_cast<std::size_t>(i)];
        if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) || !(lower(i) < upper(i)))
            throw ValidationError("parameter " + name + ": box must be finite and non-empty");
        if (!(step(i) > 0.0) || !std::isfinite(step(i)))
            throw ValidationError("parameter " + name + ": step must be positive");
        if (!(theta(i) >= lower(i) && theta(i) <= upper(i)))
            throw ValidationError("parameter " + name + ": initial value outside the box");
    }
}

double reflect_into(double value, double lower, double upper)
{
    const double width = upper - lower;
    double v = std::fmod(value - lower, 2.0 * width);
    if (v < 0.0)
        v += 2.0 * width;
    return v <= width ? lower + v : upper - (v - width);
}

std::vector<LikelihoodRow> likelihood_scan(const ModelBuilder& build, const std::vector<Vector>& grid)
{
    std::vector<LikelihoodRow> out;
    out.reserve(grid.size());
    for (const Vector& theta : grid)
        out.push_back({theta, exact_likelihood(build(theta))});
    return out;
}

McLikelihood mc_likelihood(const TreeModel& model, const BackwardPass& pass, std::size_t n, std::uint64_t seed,
                           std::size_t threads)
{
    if (n < 2)
        throw ValidationError("mc_likelihood: need at least 2 samples");
    std::vector<double> log_values(n, kNegInf);
    const auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng = substream(seed, i);
            const WeightedSample s = forward_guide(model, pass, rng);
            log_values[i] = s.degenerate ? kNegInf : s.log_lhat();
        }
    };
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t b = t * chunk;
            const std::size_t e = std::min(n, b + chunk);
            if (b < e)
                pool.emplace_back(work, b, e);
        }
        for (auto& th : pool)
            th.join();
    }

    McLikelihood out;
    out.samples = n;
    double shift = kNegInf;
    for (double l : log_values) {
        if (l == kNegInf)
            ++out.degenerate;
        shift = std::max(shift, l);
    }
    if (shift == kNegInf)
        return out;
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::exp(log_values[i] - shift);
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double scale = std::exp(shift);
    out.estimate = mean * scale;
    out.std_error = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) * scale;
    return out;
}

double McmcResult::path_acceptance_rate() const
{
    return trace.empty() ? 0.0 : static_cast<double>(path_accepts) / static_cast<double>(trace.size());
}

double McmcResult::theta_acceptance_rate(std::size_t j) const
{
    return trace.empty() ? 0.0 : static_cast<double>(theta_accepts.at(j)) / static_cast<double>(trace.size());
}

namespace {

bool accept(double log_ratio, Rng& rng)
{
    if (log_ratio >= 0.0)
        return true;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return std::log(u) < log_ratio;
}

double sample_log_what(const WeightedSample& s) { return s.degenerate ? kNegInf : s.log_lhat(); }

} // namespace

McmcResult mcmc_run(const ModelBuilder& build, const ParamSpace& space, const McmcConfig& config,
                    const PassBuilder& pass_builder)
{
    space.validate();
    const PassBuilder make_pass = pass_builder ? pass_builder : PassBuilder([&config](const TreeModel& m) {
        return backward_filter(m, config.use_approx);
    });
    const auto log_prior = [&space](const Vector& t) { return space.log_prior ? space.log_prior(t) : 0.0; };
    const std::size_t p = space.size();

    Rng rng = substream(config.seed, 0);
    std::normal_distribution<double> normal;

    McmcResult result;
    result.theta_accepts.assign(p, 0);
    McmcState& state = result.final_state;
    state.theta = space.theta;
    TreeModel model = build(state.theta);
    BackwardPass pass = make_pass(model);
    double current_log_prior = log_prior(state.theta);

    std::size_t attempts = 0;
    do {
        state.innovations = draw_innovations(model, rng);
        state.sample = forward_guide(model, pass, state.innovations);
        state.log_what = sample_log_what(state.sample);
        if (++attempts > std::max<std::size_t>(config.max_stall, 1) && state.log_what == kNegInf)
            throw StallError("mcmc: no non-degenerate initial path after " + std::to_string(attempts - 1) +
                             " attempts (last: " + state.sample.degenerate_reason + ")");
    } while (state.log_what == kNegInf);

    result.trace.reserve(config.iterations);
    std::size_t stall = 0;
    for (std::size_t it = 1; it <= config.iterations; ++it) {
        TraceRow row;
        row.iteration = it;
        row.theta_accepted.assign(p, false);
        bool any_valid = false;
        std::string last_reason;

        if (config.update_paths) {
            Innovations fresh = draw_innovations(model, rng);
            WeightedSample proposal = forward_guide(model, pass, fresh);
            const double l = sample_log_what(proposal);
            if (l != kNegInf) {
                any_valid = true;
                if (accept(l - state.log_what, rng)) {
                    state.innovations = std::move(fresh);
                    state.sample = std::move(proposal);
                    state.log_what = l;
                    row.path_accepted = true;
                    ++result.path_accepts;
                }
            } else {
                last_reason = proposal.degenerate_reason;
            }
        }

        for (std::size_t j = 0; j < p; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            Vector theta = state.theta;
            theta(jj) = reflect_into(theta(jj) + space.step(jj) * normal(rng), space.lower(jj), space.upper(jj));
            const double lp = log_prior(theta);
            if (lp == kNegInf)
                continue;
            try {
                TreeModel m = build(theta);
                BackwardPass ps = make_pass(m);
                WeightedSample s = forward_guide(m, ps, state.innovations);
                const double l = sample_log_what(s);
                if (l == kNegInf) {
                    last_reason = s.degenerate_reason;
                    continue;
                }
                any_valid = true;
                if (accept(l - state.log_what + lp - current_log_prior, rng)) {
                    state.theta = std::move(theta);
                    state.sample = std::move(s);
                    state.log_what = l;
                    current_log_prior = lp;
                    model = std::move(m);
                    pass = std::move(ps);
                    row.theta_accepted[j] = true;
                    ++result.theta_accepts[j];
                }
            } catch (const NumericalError& e) {
                last_reason = e.what();
            }
        }

        if (!any_valid && (config.update_paths || p > 0)) {
            if (++stall > config.max_stall)
                throw StallError("mcmc: " + std::to_string(stall) + " consecutive iterations with only degenerate " +
                                 "proposals, stopped at iteration " + std::to_string(it) + " (last: " + last_reason +
                                 ")");
        } else {
            stall = 0;
        }

        state.iteration = it;
        row.theta = state.theta;
        row.log_what = state.log_what;
        result.trace.push_back(std::move(row));
        if (config.observer)
            config.observer(state);
    }
    return result;
}

} // namespace bffg
