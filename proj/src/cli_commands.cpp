#include "bffg/cli_commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "bffg/bif.hpp"
#include "bffg/errors.hpp"
#include "bffg/guide.hpp"
#include "bffg/infer.hpp"
#include "bffg/model_file.hpp"
#include "bffg/oracle.hpp"

namespace bffg::cli {

namespace {

class UsageError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep))
        out.push_back(item);
    return out;
}

double to_double(const std::string& s, const std::string& what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError(what + ": cannot read \"" + s + "\" as a number");
    }
}

std::uint64_t require_seed(const Options& o)
{
    if (!o.seed)
        throw UsageError(o.command + " is stochastic and needs an explicit --seed");
    return *o.seed;
}

Vector theta_from_options(const ModelSpec& spec, const Options& o)
{
    Vector theta = initial_theta(spec);
    if (!o.theta)
        return theta;
    const auto parts = split(*o.theta, ',');
    if (parts.size() != spec.parameters.size())
        throw UsageError("--theta: expected " + std::to_string(spec.parameters.size()) + " values");
    for (std::size_t i = 0; i < parts.size(); ++i)
        theta(static_cast<Eigen::Index>(i)) = to_double(parts[i], "--theta");
    return theta;
}

std::string theta_header(const ModelSpec& spec)
{
    std::string h;
    for (std::size_t i = 0; i < spec.parameters.size(); ++i)
        h += (i ? "," : "") + spec.parameters[i].name;
    return h;
}

std::string theta_cells(const Vector& theta)
{
    std::string s;
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        s += (i ? "," : "") + format_number(theta(i));
    return s;
}

// Output stream for --out, or the given default.
class Sink {
public:
    Sink(const std::optional<std::string>& path, std::ostream& fallback) : stream_(&fallback)
    {
        if (path) {
            file_.open(*path);
            if (!file_)
                throw Error("cannot open " + *path + " for writing");
            stream_ = &file_;
        }
    }
    std::ostream& get() { return *stream_; }
    bool redirected() const { return file_.is_open(); }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

int cmd_validate(const ModelSpec& spec, const Options& o, std::ostream& out)
{
    const TreeModel model = instantiate(spec, theta_from_options(spec, o));
    out << "valid, " << model.vertices().size() << " latent vertices, " << model.observations().size()
        << " leaves\n";
    return ok;
}

int cmd_likelihood(const ModelSpec& spec, const Options& o, std::ostream& out)
{
    std::vector<Vector> grid;
    if (o.theta_grid) {
        if (spec.parameters.size() != 1)
            throw UsageError("--theta-grid needs a model with exactly one parameter");
        for (double v : parse_theta_grid(*o.theta_grid))
            grid.push_back(Vector::Constant(1, v));
    } else {
        grid.push_back(theta_from_options(spec, o));
    }
    const ModelBuilder build = model_builder(spec);
    {
        const TreeModel probe = build(grid.front());
        if (!probe.all_finite())
            throw UnsupportedError("likelihood: exact likelihoods need a finite-state model");
    }
    const auto rows = likelihood_scan(build, grid);

    Sink sink(o.out, out);
    std::ostream& s = sink.get();
    const std::string names = spec.parameters.empty() ? std::string() : theta_header(spec) + ",";
    s << names << "log_likelihood" << (o.oracle ? ",log_likelihood_oracle" : "") << "\n";
    double max_delta = 0.0;
    for (const LikelihoodRow& r : rows) {
        if (!spec.parameters.empty())
            s << theta_cells(r.theta) << ",";
        s << format_number(r.log_likelihood);
        if (o.oracle) {
            const double enumerated = std::log(enumerate_likelihood(build(r.theta)).likelihood);
            if (!(std::isinf(enumerated) && enumerated == r.log_likelihood))
                max_delta = std::max(max_delta, std::abs(enumerated - r.log_likelihood));
            s << "," << format_number(enumerated);
        }
        s << "\n";
    }
    if (o.oracle)
        s << "# max_abs_delta," << format_number(max_delta) << "\n";
    return ok;
}

int cmd_sample(const ModelSpec& spec, const Options& o, std::ostream& out)
{
    const std::uint64_t seed = require_seed(o);
    const std::size_t n = o.n.value_or(1000);
    const TreeModel model = instantiate(spec, theta_from_options(spec, o));
    const BackwardPass pass = backward_filter(model, true);

    Sink sink(o.out, out);
    std::ostream& s = sink.get();
    std::optional<std::ofstream> paths;
    if (o.paths) {
        paths.emplace(*o.paths);
        if (!*paths)
            throw Error("cannot open " + *o.paths + " for writing");
        *paths << "sample,edge,step,time";
        std::size_t dmax = 0;
        for (const Vertex& v : model.vertices())
            if (v.kind == VertexKind::gaussian)
                dmax = std::max(dmax, v.dim);
        for (std::size_t i = 0; i < dmax; ++i)
            *paths << ",x" << i;
        *paths << "\n";
    }

    s << "sample";
    for (const Vertex& v : model.vertices()) {
        if (v.kind == VertexKind::finite) {
            s << "," << v.id;
        } else {
            for (std::size_t i = 0; i < v.dim; ++i)
                s << "," << v.id << "[" << i << "]";
        }
    }
    s << ",log_g_root,log_weight,lhat,degenerate\n";

    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> log_values;
    log_values.reserve(n);
    std::size_t degenerate = 0;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = substream(seed, i);
        const WeightedSample w = forward_guide(model, pass, rng);
        s << i;
        for (std::size_t v = 0; v < model.vertices().size(); ++v) {
            const Vertex& vx = model.vertices()[v];
            if (w.degenerate && w.values[v].index() == 0 && vx.kind == VertexKind::gaussian) {
                for (std::size_t k = 0; k < vx.dim; ++k)
                    s << ",nan";
                continue;
            }
            if (vx.kind == VertexKind::finite) {
                s << "," << std::get<std::size_t>(w.values[v]);
            } else {
                const auto* x = std::get_if<Vector>(&w.values[v]);
                for (std::size_t k = 0; k < vx.dim; ++k)
                    s << "," << (x && x->size() == static_cast<Eigen::Index>(vx.dim)
                                     ? format_number((*x)(static_cast<Eigen::Index>(k)))
                                     : std::string("nan"));
            }
        }
        const double l = w.degenerate ? neg_inf : w.log_lhat();
        s << "," << format_number(w.log_g_root) << "," << format_number(w.log_weight) << ","
          << format_number(std::exp(l)) << "," << (w.degenerate ? 1 : 0) << "\n";
        log_values.push_back(l);
        degenerate += w.degenerate ? 1 : 0;

        if (paths) {
            for (std::size_t e = 0; e < w.paths.size(); ++e) {
                if (!w.paths[e])
                    continue;
                const Matrix& p = *w.paths[e];
                const auto& traj = *pass.trajectories[e];
                const std::string label = pass.edge_messages[e].label;
                for (Eigen::Index k = 0; k < p.cols(); ++k) {
                    *paths << i << "," << label << "," << k << ","
                           << format_number(traj.times[static_cast<std::size_t>(k)]);
                    for (Eigen::Index r = 0; r < p.rows(); ++r)
                        *paths << "," << format_number(p(r, k));
                    *paths << "\n";
                }
            }
        }
    }

    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < log_values.size(); ++i) {
        const double v = std::exp(log_values[i]);
        const double d = v - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (v - mean);
    }
    const double se = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    s << "# samples," << n << "\n";
    s << "# degenerate," << degenerate << "\n";
    s << "# estimate," << format_number(n ? mean : 0.0) << "\n";
    s << "# std_error," << format_number(se) << "\n";
    return ok;
}

int cmd_infer(const ModelSpec& spec, const Options& o, std::ostream& out)
{
    McmcConfig config;
    config.seed = require_seed(o);
    config.iterations = o.iters.value_or(1000);
    ParamSpace space = param_space(spec);
    if (o.theta)
        space.theta = theta_from_options(spec, o);
    if (space.size() == 0)
        throw UsageError("infer: the model declares no parameters");
    const McmcResult result = mcmc_run(model_builder(spec), space, config);

    Sink sink(o.out, out);
    std::ostream& s = sink.get();
    s << "iteration," << theta_header(spec) << ",log_what,path_accepted";
    for (const ParameterSpec& p : spec.parameters)
        s << "," << p.name << "_accepted";
    s << "\n";
    for (const TraceRow& r : result.trace) {
        s << r.iteration << "," << theta_cells(r.theta) << "," << format_number(r.log_what) << ","
          << (r.path_accepted ? 1 : 0);
        for (bool a : r.theta_accepted)
            s << "," << (a ? 1 : 0);
        s << "\n";
    }

    std::ostream& summary = out;
    const std::size_t kept = result.trace.size() > o.burn ? result.trace.size() - o.burn : 0;
    summary << "# iterations," << result.trace.size() << "\n";
    summary << "# burn_in," << std::min(o.burn, result.trace.size()) << "\n";
    summary << "# path_acceptance_rate," << format_number(result.path_acceptance_rate()) << "\n";
    for (std::size_t j = 0; j < space.size(); ++j) {
        double mean = 0.0;
        for (std::size_t i = o.burn; i < result.trace.size(); ++i)
            mean += result.trace[i].theta(static_cast<Eigen::Index>(j));
        summary << "# " << spec.parameters[j].name << "_posterior_mean,"
                << (kept ? format_number(mean / static_cast<double>(kept)) : std::string("nan")) << "\n";
        summary << "# " << spec.parameters[j].name << "_acceptance_rate,"
                << format_number(result.theta_acceptance_rate(j)) << "\n";
    }
    return ok;
}

} // namespace

std::vector<double> parse_theta_grid(const std::string& text)
{
    const auto parts = split(text, ':');
    if (parts.size() != 3)
        throw UsageError("--theta-grid: expected a:b:step");
    const double a = to_double(parts[0], "--theta-grid");
    const double b = to_double(parts[1], "--theta-grid");
    const double step = to_double(parts[2], "--theta-grid");
    if (!(step > 0.0) || !(b >= a))
        throw UsageError("--theta-grid: need step > 0 and b >= a");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(a + static_cast<double>(i) * step);
    return out;
}

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int run(const Options& options, std::ostream& out, std::ostream& err)
{
    try {
        const ModelSpec spec = load_model(options.model_path);
        if (options.command == "validate")
            return cmd_validate(spec, options, out);
        if (options.command == "likelihood")
            return cmd_likelihood(spec, options, out);
        if (options.command == "sample")
            return cmd_sample(spec, options, out);
        if (options.command == "infer")
            return cmd_infer(spec, options, out);
        throw UsageError("unknown command \"" + options.command + "\"");
    } catch (const StallError& e) {
        err << "error: " << e.what() << "\n";
        return stalled;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return validation_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return runtime_failure;
    }
}

} // namespace bffg::cli
