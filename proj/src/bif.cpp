#include "bffg/bif.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bffg/errors.hpp"

namespace bffg {

double Message::operator()(std::size_t x, std::size_t y) const
{
    const auto& num = std::get<FiniteH>(h);
    const auto& den = std::get<FiniteH>(pulled);
    const double d = den.values(static_cast<Eigen::Index>(x));
    if (!(d > 0.0))
        throw NumericalError("message " + label + ": (kappa h)(x) = 0 at x = " + std::to_string(x));
    return std::exp(num.log_scale - den.log_scale) * num.values(static_cast<Eigen::Index>(y)) / d;
}

double Message::log_value(const Vector& x, const Vector& y) const
{
    return std::get<GaussianTriplet>(h).log_at(y) - std::get<GaussianTriplet>(pulled).log_at(x);
}

namespace {

std::string edge_label(const TreeModel& model, const Edge& e)
{
    return model.vertices()[e.parent].id + "->" + model.vertices()[e.child].id;
}

} // namespace

BackwardPass backward_filter(const TreeModel& model, bool use_approx)
{
    const auto& vertices = model.vertices();
    const auto& edges = model.edges();
    BackwardPass pass;
    pass.vertex_h.resize(vertices.size());
    pass.edge_messages.resize(edges.size());
    pass.trajectories.resize(edges.size());
    pass.used_approx.assign(edges.size(), false);

    const auto& order = model.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const std::size_t v = *it;
        std::optional<HFun> acc;
        const auto absorb = [&acc](HFun contribution) {
            acc = acc ? fuse(*acc, contribution) : std::move(contribution);
        };
        for (std::size_t o : model.vertex_observations(v)) {
            const Observation& obs = model.observations()[o];
            absorb(from_observation(obs.kernel, obs.value));
        }
        for (std::size_t ei : model.child_edges(v)) {
            const Edge& e = edges[ei];
            const HFun& child_h = pass.vertex_h[e.child];
            const bool approx = use_approx && e.approx.has_value();
            const Kernel& k = approx ? *e.approx : e.kernel;
            if (!is_tractable(k))
                throw ValidationError("edge " + edge_label(model, e) + ": kernel of kind " + kernel_kind_name(k) +
                                      " is intractable and no approximate kernel is available");
            HFun pulled = [&]() -> HFun {
                if (const auto* ls = std::get_if<LinearSdeKernel>(&k)) {
                    const auto* g = std::get_if<GaussianTriplet>(&child_h);
                    if (g == nullptr)
                        throw DimensionError("edge " + edge_label(model, e) + ": SDE edge needs a Gaussian h");
                    try {
                        pass.trajectories[ei] = backward_ode_solve(*g, *ls);
                    } catch (const NumericalError& err) {
                        throw NumericalError("edge " + edge_label(model, e) + ": " + err.what());
                    }
                    return pass.trajectories[ei]->start();
                }
                return pullback(k, child_h);
            }();
            pass.used_approx[ei] = approx;
            pass.edge_messages[ei] = Message{edge_label(model, e), child_h, pulled};
            absorb(std::move(pulled));
        }
        if (!acc)
            throw ValidationError("vertex \"" + vertices[v].id + "\" receives no information");
        pass.vertex_h[v] = std::move(*acc);
    }
    return pass;
}

double log_prior_mass(const TreeModel& model, const BackwardPass& pass)
{
    const HFun& h = pass.vertex_h[model.root()];
    if (const auto* fp = std::get_if<FinitePrior>(&model.prior())) {
        const auto& fh = std::get<FiniteH>(h);
        const double s = fp->weights.dot(fh.values);
        if (!(s > 0.0))
            return -std::numeric_limits<double>::infinity();
        return std::log(s) + fh.log_scale;
    }
    const auto& g = std::get<GaussianTriplet>(h);
    if (const auto* gp = std::get_if<GaussianPrior>(&model.prior()))
        return log_expectation(gp->mean, spd_cholesky(gp->cov, "root prior covariance"), g);
    return g.log_at(std::get<DiracPrior>(model.prior()).value);
}

double exact_likelihood(const TreeModel& model)
{
    if (!model.all_finite())
        throw UnsupportedError("exact_likelihood: non-finite kernels present");
    return log_prior_mass(model, backward_filter(model, false));
}

} // namespace bffg
