#include "bffg/guide.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bffg/errors.hpp"

namespace bffg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

Vector normals(Rng& rng, std::size_t n)
{
    std::normal_distribution<double> z;
    Vector out(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out(i) = z(rng);
    return out;
}

// Index of the first cumulative weight exceeding u * total.
std::size_t inverse_cdf(const Vector& weights, double total, double u)
{
    const double target = u * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (weights(i) <= 0.0)
            continue;
        acc += weights(i);
        last_positive = static_cast<std::size_t>(i);
        if (acc > target)
            return last_positive;
    }
    return last_positive;
}

std::size_t innovation_size(const TreeModel& model, std::size_t edge_index)
{
    const Edge& e = model.edges()[edge_index];
    if (std::holds_alternative<FiniteKernel>(e.kernel))
        return 1;
    if (const auto* s = std::get_if<SdeEdgeKernel>(&e.kernel))
        return s->steps() * s->noise_dim();
    if (const auto* l = std::get_if<LinearSdeKernel>(&e.kernel))
        return l->steps() * l->noise_dim();
    return kernel_out_dim(e.kernel);
}

std::size_t root_innovation_size(const TreeModel& model)
{
    if (std::holds_alternative<FinitePrior>(model.prior()))
        return 1;
    if (std::holds_alternative<GaussianPrior>(model.prior()))
        return model.vertices()[model.root()].dim;
    return 0;
}

void mark_degenerate(WeightedSample& s, std::string reason)
{
    s.degenerate = true;
    s.log_weight = kNegInf;
    s.degenerate_reason = std::move(reason);
}

} // namespace

Rng substream(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x9e3779b9u};
    return Rng(seq);
}

Innovations draw_innovations(const TreeModel& model, Rng& rng)
{
    Innovations out;
    out.draws.reserve(model.edges().size() + 1);
    if (std::holds_alternative<FinitePrior>(model.prior())) {
        out.draws.push_back(Vector::Constant(1, uniform01(rng)));
    } else {
        out.draws.push_back(normals(rng, root_innovation_size(model)));
    }
    for (std::size_t e = 0; e < model.edges().size(); ++e) {
        if (std::holds_alternative<FiniteKernel>(model.edges()[e].kernel))
            out.draws.push_back(Vector::Constant(1, uniform01(rng)));
        else
            out.draws.push_back(normals(rng, innovation_size(model, e)));
    }
    return out;
}

GuidedRow guided_row(const FiniteKernel& kappa, const FiniteH& g, const FiniteH& pulled, std::size_t x)
{
    if (x >= kappa.in_states() || g.size() != kappa.out_states() || pulled.size() != kappa.in_states())
        throw DimensionError("guided_row: dimension mismatch");
    GuidedRow out;
    const Vector row = kappa.matrix().row(static_cast<Eigen::Index>(x)).transpose().cwiseProduct(g.values);
    const double total = row.sum();
    if (!(total > 0.0)) {
        out.degenerate = true;
        out.log_w_increment = kNegInf;
        out.probabilities = Vector::Zero(row.size());
        return out;
    }
    out.probabilities = row / total;
    const double den = pulled.values(static_cast<Eigen::Index>(x));
    out.log_w_increment = std::log(total) + g.log_scale - std::log(den) - pulled.log_scale;
    return out;
}

DiscreteStep guided_discrete_step(const FiniteKernel& kappa, const FiniteH& g, const FiniteH& pulled, std::size_t x,
                                  double u)
{
    const GuidedRow row = guided_row(kappa, g, pulled, x);
    if (row.degenerate)
        return DiscreteStep{0, kNegInf, true};
    return DiscreteStep{inverse_cdf(row.probabilities, 1.0, u), row.log_w_increment, false};
}

DiscreteStep guided_discrete_step(const FiniteKernel& kappa, const FiniteH& g, const FiniteH& pulled, std::size_t x,
                                  Rng& rng)
{
    return guided_discrete_step(kappa, g, pulled, x, uniform01(rng));
}

DiscreteStep guided_discrete_step(const FiniteKernel& kappa, const FiniteH& g, std::size_t x, Rng& rng)
{
    DiscreteStep step = guided_discrete_step(kappa, g, pullback(kappa, g), x, uniform01(rng));
    if (!step.degenerate)
        step.log_w_increment = 0.0;
    return step;
}

Vector guided_drift(const Vector& b, const Matrix& a, const GaussianTriplet& g, const Vector& x)
{
    return b + a * g.score(x);
}

double guided_log_weight_rate(const Vector& b, const Vector& b_tilde, const Matrix& a, const Matrix& a_tilde,
                              const GaussianTriplet& g, const Vector& x)
{
    const Vector r = g.score(x);
    const Matrix D = a - a_tilde;
    return (b - b_tilde).dot(r) + 0.5 * (r.dot(D * r) - D.cwiseProduct(g.H).sum());
}

SdeResult simulate_guided_sde(const GuidedSdeSpec& spec, const Vector& x_start, const Vector& noise)
{
    const SdeEdgeKernel& fwd = spec.forward;
    const TripletTrajectory& traj = spec.trajectory;
    const std::size_t steps = traj.steps();
    const auto d = static_cast<Eigen::Index>(fwd.dim());
    const auto m = static_cast<Eigen::Index>(fwd.noise_dim());
    if (steps != fwd.steps())
        throw DimensionError("guided SDE: trajectory grid does not match the forward grid");
    if (x_start.size() != d)
        throw DimensionError("guided SDE: start state has dimension " + std::to_string(x_start.size()) +
                             ", expected " + std::to_string(d));
    if (noise.size() != static_cast<Eigen::Index>(steps) * m)
        throw DimensionError("guided SDE: expected " + std::to_string(steps * fwd.noise_dim()) + " normals");

    SdeResult out;
    out.path.resize(d, static_cast<Eigen::Index>(steps + 1));
    out.path.col(0) = x_start;
    Vector x = x_start;
    Matrix a(d, d), D(d, d);
    Vector r(d), bt(d), ar(d), Dr(d), noise_term(d);
    double log_w = 0.0;

    for (std::size_t k = 0; k < steps; ++k) {
        const double u = traj.times[k];
        const double h = traj.times[k + 1] - u;
        const GaussianTriplet& g = traj.triplets[k];
        const Vector b = fwd.drift(u, x);
        const Matrix sigma = fwd.dispersion(u, x);
        a.noalias() = sigma * sigma.transpose();
        r = g.F;
        r.noalias() -= g.H * x;
        bt.noalias() = traj.B[k] * x;
        bt += traj.beta[k];
        D = a - traj.a[k];
        Dr.noalias() = D * r;
        log_w += h * ((b - bt).dot(r) + 0.5 * (r.dot(Dr) - D.cwiseProduct(g.H).sum()));

        ar.noalias() = a * r;
        noise_term.noalias() = sigma * noise.segment(static_cast<Eigen::Index>(k) * m, m);
        x += h * (b + ar) + std::sqrt(h) * noise_term;
        if (!x.allFinite() || !std::isfinite(log_w)) {
            out.degenerate = true;
            out.failed_index = k + 1;
            out.log_w_increment = kNegInf;
            return out;
        }
        out.path.col(static_cast<Eigen::Index>(k + 1)) = x;
    }
    out.log_w_increment = log_w;
    return out;
}

SdeResult simulate_guided_sde(const GuidedSdeSpec& spec, const Vector& x_start, Rng& rng)
{
    return simulate_guided_sde(spec, x_start, normals(rng, spec.trajectory.steps() * spec.forward.noise_dim()));
}

WeightedSample forward_guide(const TreeModel& model, const BackwardPass& pass, const Innovations& innovations)
{
    const auto& edges = model.edges();
    if (innovations.draws.size() != edges.size() + 1)
        throw DimensionError("forward_guide: innovations do not match the model");
    if (pass.vertex_h.size() != model.vertices().size() || pass.edge_messages.size() != edges.size())
        throw DimensionError("forward_guide: backward pass was computed for a different model");

    WeightedSample s;
    s.values.resize(model.vertices().size());
    s.paths.resize(edges.size());
    const std::size_t root = model.root();
    const HFun& g_root = pass.vertex_h[root];
    const Vector& root_draw = innovations.draws[0];

    if (const auto* fp = std::get_if<FinitePrior>(&model.prior())) {
        const auto& g = std::get<FiniteH>(g_root);
        const Vector w = fp->weights.cwiseProduct(g.values);
        const double total = w.sum();
        if (!(total > 0.0)) {
            s.log_g_root = kNegInf;
            mark_degenerate(s, "root: prior has no mass where h is positive");
            return s;
        }
        s.log_g_root = std::log(total) + g.log_scale;
        s.values[root] = inverse_cdf(w, total, root_draw(0));
    } else if (const auto* gp = std::get_if<GaussianPrior>(&model.prior())) {
        const GaussianTilt t = tilt(gp->mean, spd_cholesky(gp->cov, "root prior covariance"),
                                    std::get<GaussianTriplet>(g_root));
        s.log_g_root = t.log_mass;
        s.values[root] = Vector(t.mean + t.cov_sqrt * root_draw);
    } else {
        const Vector& x0 = std::get<DiracPrior>(model.prior()).value;
        s.log_g_root = std::get<GaussianTriplet>(g_root).log_at(x0);
        s.values[root] = x0;
    }

    for (std::size_t v : model.order()) {
        for (std::size_t ei : model.child_edges(v)) {
            const Edge& e = edges[ei];
            const Message& msg = pass.edge_messages[ei];
            const Vector& draw = innovations.draws[ei + 1];
            const bool exact = !pass.used_approx[ei];
            if (draw.size() != static_cast<Eigen::Index>(innovation_size(model, ei)))
                throw DimensionError("forward_guide: innovation size mismatch on edge " + msg.label);

            if (const auto* fk = std::get_if<FiniteKernel>(&e.kernel)) {
                const std::size_t x = std::get<std::size_t>(s.values[e.parent]);
                const DiscreteStep step = guided_discrete_step(*fk, std::get<FiniteH>(msg.h),
                                                               std::get<FiniteH>(msg.pulled), x, draw(0));
                if (step.degenerate) {
                    mark_degenerate(s, "edge " + msg.label + ": guided row has zero mass");
                    return s;
                }
                s.values[e.child] = step.y;
                s.log_weight += exact ? 0.0 : step.log_w_increment;
                continue;
            }

            const Vector& x = std::get<Vector>(s.values[e.parent]);
            const auto& g = std::get<GaussianTriplet>(msg.h);
            const auto& pulled = std::get<GaussianTriplet>(msg.pulled);

            if (std::holds_alternative<LinearGaussianKernel>(e.kernel) ||
                std::holds_alternative<NonlinearGaussianKernel>(e.kernel)) {
                Vector mean;
                const Matrix* chol = nullptr;
                if (const auto* lg = std::get_if<LinearGaussianKernel>(&e.kernel)) {
                    mean = lg->B() * x + lg->beta();
                    chol = &lg->Gamma_cholesky();
                } else {
                    const auto& nl = std::get<NonlinearGaussianKernel>(e.kernel);
                    mean = nl.mean(x);
                    chol = &nl.Gamma_cholesky();
                }
                if (!mean.allFinite()) {
                    mark_degenerate(s, "edge " + msg.label + ": non-finite transition mean");
                    return s;
                }
                const GaussianTilt t = tilt(mean, *chol, g);
                s.values[e.child] = Vector(t.mean + t.cov_sqrt * draw);
                s.log_weight += exact ? 0.0 : t.log_mass - pulled.log_at(x);
                continue;
            }

            const TripletTrajectory& traj = *pass.trajectories[ei];
            const SdeEdgeKernel fwd = std::holds_alternative<SdeEdgeKernel>(e.kernel)
                                          ? std::get<SdeEdgeKernel>(e.kernel)
                                          : std::get<LinearSdeKernel>(e.kernel).as_sde();
            SdeResult r = simulate_guided_sde(GuidedSdeSpec{fwd, traj}, x, draw);
            if (r.degenerate) {
                std::ostringstream why;
                why << "edge " << msg.label << ": non-finite state at grid index " << r.failed_index;
                mark_degenerate(s, why.str());
                return s;
            }
            s.values[e.child] = Vector(r.path.col(r.path.cols() - 1));
            s.log_weight += exact ? 0.0 : r.log_w_increment;
            s.paths[ei] = std::move(r.path);
        }
    }
    if (!std::isfinite(s.log_weight))
        mark_degenerate(s, "non-finite log-weight");
    return s;
}

WeightedSample forward_guide(const TreeModel& model, const BackwardPass& pass, Rng& rng)
{
    return forward_guide(model, pass, draw_innovations(model, rng));
}

PriorDraw forward_simulate(const TreeModel& model, Rng& rng)
{
    PriorDraw out;
    out.values.resize(model.vertices().size());
    out.paths.resize(model.edges().size());
    const std::size_t root = model.root();
    if (const auto* fp = std::get_if<FinitePrior>(&model.prior())) {
        out.values[root] = inverse_cdf(fp->weights, fp->weights.sum(), uniform01(rng));
    } else if (const auto* gp = std::get_if<GaussianPrior>(&model.prior())) {
        out.values[root] = Vector(gp->mean + spd_cholesky(gp->cov, "root prior covariance") *
                                                 normals(rng, static_cast<std::size_t>(gp->mean.size())));
    } else {
        out.values[root] = std::get<DiracPrior>(model.prior()).value;
    }

    for (std::size_t v : model.order()) {
        for (std::size_t ei : model.child_edges(v)) {
            const Edge& e = model.edges()[ei];
            if (const auto* fk = std::get_if<FiniteKernel>(&e.kernel)) {
                const auto x = static_cast<Eigen::Index>(std::get<std::size_t>(out.values[e.parent]));
                const Vector row = fk->matrix().row(x).transpose();
                out.values[e.child] = inverse_cdf(row, row.sum(), uniform01(rng));
                continue;
            }
            const Vector& x = std::get<Vector>(out.values[e.parent]);
            if (const auto* lg = std::get_if<LinearGaussianKernel>(&e.kernel)) {
                out.values[e.child] = Vector(lg->B() * x + lg->beta() + lg->Gamma_cholesky() * normals(rng, lg->out_dim()));
                continue;
            }
            if (const auto* nl = std::get_if<NonlinearGaussianKernel>(&e.kernel)) {
                out.values[e.child] = Vector(nl->mean(x) + nl->Gamma_cholesky() * normals(rng, nl->out_dim()));
                continue;
            }
            const SdeEdgeKernel fwd = std::holds_alternative<SdeEdgeKernel>(e.kernel)
                                          ? std::get<SdeEdgeKernel>(e.kernel)
                                          : std::get<LinearSdeKernel>(e.kernel).as_sde();
            const std::size_t steps = fwd.steps();
            const double h = (fwd.t1() - fwd.t0()) / static_cast<double>(steps);
            Matrix path(x.size(), static_cast<Eigen::Index>(steps + 1));
            path.col(0) = x;
            Vector cur = x;
            for (std::size_t k = 0; k < steps; ++k) {
                const double u = fwd.t0() + static_cast<double>(k) * h;
                cur += h * fwd.drift(u, cur) + std::sqrt(h) * fwd.dispersion(u, cur) * normals(rng, fwd.noise_dim());
                path.col(static_cast<Eigen::Index>(k + 1)) = cur;
            }
            out.values[e.child] = cur;
            out.paths[ei] = std::move(path);
        }
    }

    for (const Observation& o : model.observations()) {
        if (const auto* fo = std::get_if<FiniteObservation>(&o.kernel)) {
            const auto x = static_cast<Eigen::Index>(std::get<std::size_t>(out.values[o.vertex]));
            const Vector row = fo->lambda().row(x).transpose();
            out.observations.emplace_back(inverse_cdf(row, row.sum(), uniform01(rng)));
        } else {
            const auto& go = std::get<GaussianObservation>(o.kernel);
            const Vector& x = std::get<Vector>(out.values[o.vertex]);
            out.observations.emplace_back(Vector(go.L() * x + go.Sigma_cholesky() * normals(rng, go.obs_dim())));
        }
    }
    return out;
}

} // namespace bffg
