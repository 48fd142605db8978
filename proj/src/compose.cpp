#include "bffg/compose.hpp"

#include <cmath>
#include <optional>
#include <variant>

#include "bffg/errors.hpp"

namespace bffg {

MassMeasure MassMeasure::single(Measure m, double mass)
{
    if (!(mass >= 0.0))
        throw ValidationError("mass-measure: mass must be nonnegative");
    MassMeasure out;
    out.factors.push_back(std::move(m));
    out.mass = mass;
    return out;
}

std::pair<Message, HFun> backward_map(const Kernel& kappa_tilde, const HFun& h, std::string label)
{
    HFun pulled = pullback(kappa_tilde, h);
    Message m{std::move(label), h, pulled};
    return {std::move(m), std::move(pulled)};
}

namespace {

MassMeasure degenerate_result(const Measure& like)
{
    MassMeasure out;
    out.factors.push_back(like);
    out.mass = 0.0;
    out.degenerate = true;
    return out;
}

MassMeasure forward_finite(const FiniteKernel& k, const Message& m, const FiniteMeasure& mu, double mass)
{
    const auto* h = std::get_if<FiniteH>(&m.h);
    const auto* den = std::get_if<FiniteH>(&m.pulled);
    if (h == nullptr || den == nullptr)
        throw DimensionError("forward map " + m.label + ": finite kernel with a non-finite message");
    if (mu.weights.size() != static_cast<Eigen::Index>(k.in_states()) || den->size() != k.in_states() ||
        h->size() != k.out_states())
        throw DimensionError("forward map " + m.label + ": dimension mismatch");

    const double scale = std::exp(h->log_scale - den->log_scale);
    Vector u = Vector::Zero(static_cast<Eigen::Index>(k.out_states()));
    for (Eigen::Index x = 0; x < mu.weights.size(); ++x) {
        if (mu.weights(x) == 0.0)
            continue;
        if (!(den->values(x) > 0.0))
            throw NumericalError("forward map " + m.label + ": (kappa_tilde h)(x) = 0 at x = " + std::to_string(x));
        u += (mu.weights(x) / den->values(x)) * k.matrix().row(x).transpose();
    }
    u = u.cwiseProduct(h->values) * scale;
    const double w = u.sum();
    if (!(w > 0.0))
        return degenerate_result(FiniteMeasure{Vector::Zero(u.size())});
    return MassMeasure::single(FiniteMeasure{u / w}, mass * w);
}

MassMeasure forward_gaussian(const LinearGaussianKernel& k, const Message& m, const GaussianMeasure& mu, double mass)
{
    const auto* h = std::get_if<GaussianTriplet>(&m.h);
    const auto* den = std::get_if<GaussianTriplet>(&m.pulled);
    if (h == nullptr || den == nullptr)
        throw DimensionError("forward map " + m.label + ": Gaussian kernel with a finite message");
    if (mu.mean.size() != static_cast<Eigen::Index>(k.in_dim()) || den->dim() != k.in_dim())
        throw DimensionError("forward map " + m.label + ": dimension mismatch");

    const GaussianTriplet kh = pullback(k, *h);
    GaussianTriplet ratio{kh.c - den->c, kh.F - den->F, kh.H - den->H};
    const Matrix S = psd_sqrt(mu.cov);
    const GaussianTilt reweighted = tilt(mu.mean, S, ratio);
    const double w = mu.mass * std::exp(reweighted.log_mass);
    if (!(w > 0.0))
        return degenerate_result(GaussianMeasure{Vector::Zero(h->F.size()), Matrix::Zero(h->F.size(), h->F.size()), 1.0});

    // Given x, the Doob transform of k by h is Gaussian with mean affine in x.
    const GaussianTilt at_zero = tilt(k.beta(), k.Gamma_cholesky(), *h);
    const Matrix W = at_zero.cov();
    const Matrix Bg = (Matrix::Identity(W.rows(), W.cols()) - W * h->H) * k.B();
    GaussianMeasure nu;
    nu.mean = Bg * reweighted.mean + at_zero.mean;
    nu.cov = symmetrized(Bg * reweighted.cov() * Bg.transpose() + W);
    nu.mass = 1.0;
    return MassMeasure::single(std::move(nu), mass * w);
}

} // namespace

MassMeasure forward_map(const Kernel& kappa, const Message& m, const MassMeasure& mu)
{
    if (mu.factors.size() != 1)
        throw DimensionError("forward map " + m.label + ": expected a single-factor measure");
    if (mu.degenerate)
        return mu;
    const Measure& in = mu.factors.front();
    if (const auto* fk = std::get_if<FiniteKernel>(&kappa)) {
        const auto* fm = std::get_if<FiniteMeasure>(&in);
        if (fm == nullptr)
            throw DimensionError("forward map " + m.label + ": finite kernel applied to a Gaussian measure");
        return forward_finite(*fk, m, *fm, mu.mass);
    }
    if (const auto* lg = std::get_if<LinearGaussianKernel>(&kappa)) {
        const auto* gm = std::get_if<GaussianMeasure>(&in);
        if (gm == nullptr)
            throw DimensionError("forward map " + m.label + ": Gaussian kernel applied to a finite measure");
        return forward_gaussian(*lg, m, *gm, mu.mass);
    }
    throw UnsupportedError(std::string("forward map: kernel kind ") + kernel_kind_name(kappa) +
                           " has no closed-form forward map");
}

struct Lens::Node {
    enum class Kind { primitive, serial, parallel };
    Kind kind = Kind::primitive;
    // primitive
    std::optional<Kernel> kappa;
    std::optional<Kernel> kappa_tilde;
    std::string label;
    // composites
    std::shared_ptr<const Node> left;
    std::shared_ptr<const Node> right;

    std::vector<std::size_t> domain;
    std::vector<std::size_t> codomain;
    std::size_t messages = 1;
};

Lens Lens::primitive(Kernel kappa, Kernel kappa_tilde, std::string label)
{
    if (is_finite_kind(kappa) != is_finite_kind(kappa_tilde) || kernel_in_dim(kappa) != kernel_in_dim(kappa_tilde) ||
        kernel_out_dim(kappa) != kernel_out_dim(kappa_tilde))
        throw DimensionError("lens " + label + ": kernel and backward kernel act on different spaces");
    if (!is_tractable(kappa_tilde))
        throw UnsupportedError("lens " + label + ": backward kernel must be tractable");
    auto node = std::make_shared<Node>();
    node->kind = Node::Kind::primitive;
    node->domain = {kernel_in_dim(kappa)};
    node->codomain = {kernel_out_dim(kappa)};
    node->kappa = std::move(kappa);
    node->kappa_tilde = std::move(kappa_tilde);
    node->label = std::move(label);
    return Lens(std::move(node));
}

Lens Lens::exact(Kernel kappa, std::string label)
{
    Kernel copy = kappa;
    return primitive(std::move(kappa), std::move(copy), std::move(label));
}

std::size_t Lens::arity() const { return node_->domain.size(); }
std::size_t Lens::message_count() const { return node_->messages; }
std::vector<std::size_t> Lens::domain() const { return node_->domain; }
std::vector<std::size_t> Lens::codomain() const { return node_->codomain; }

Lens lens_serial(const Lens& l1, const Lens& l2)
{
    if (l1.node_->codomain != l2.node_->domain)
        throw DimensionError("lens_serial: codomain of the first lens does not match the domain of the second");
    auto node = std::make_shared<Lens::Node>();
    node->kind = Lens::Node::Kind::serial;
    node->left = l1.node_;
    node->right = l2.node_;
    node->domain = l1.node_->domain;
    node->codomain = l2.node_->codomain;
    node->messages = l1.node_->messages + l2.node_->messages;
    return Lens(std::move(node));
}

Lens lens_parallel(const Lens& l1, const Lens& l2)
{
    auto node = std::make_shared<Lens::Node>();
    node->kind = Lens::Node::Kind::parallel;
    node->left = l1.node_;
    node->right = l2.node_;
    node->domain = l1.node_->domain;
    node->domain.insert(node->domain.end(), l2.node_->domain.begin(), l2.node_->domain.end());
    node->codomain = l1.node_->codomain;
    node->codomain.insert(node->codomain.end(), l2.node_->codomain.begin(), l2.node_->codomain.end());
    node->messages = l1.node_->messages + l2.node_->messages;
    return Lens(std::move(node));
}

struct LensRunner {
    using N = Lens::Node;

    static LensBackward backward(const N& n, const FactoredH& h)
    {
        if (h.size() != n.codomain.size())
            throw DimensionError("lens backward: expected " + std::to_string(n.codomain.size()) +
                                 " factors of h, got " + std::to_string(h.size()));
        switch (n.kind) {
        case N::Kind::primitive: {
            auto [msg, pulled] = backward_map(*n.kappa_tilde, h.front(), n.label);
            LensBackward out;
            out.messages.push_back(std::move(msg));
            out.h.push_back(std::move(pulled));
            return out;
        }
        case N::Kind::serial: {
            LensBackward second = backward(*n.right, h);
            LensBackward first = backward(*n.left, second.h);
            first.messages.insert(first.messages.end(), std::make_move_iterator(second.messages.begin()),
                                  std::make_move_iterator(second.messages.end()));
            return first;
        }
        case N::Kind::parallel:
        default: {
            const auto split = static_cast<std::ptrdiff_t>(n.left->codomain.size());
            LensBackward a = backward(*n.left, FactoredH(h.begin(), h.begin() + split));
            LensBackward b = backward(*n.right, FactoredH(h.begin() + split, h.end()));
            a.messages.insert(a.messages.end(), std::make_move_iterator(b.messages.begin()),
                              std::make_move_iterator(b.messages.end()));
            a.h.insert(a.h.end(), std::make_move_iterator(b.h.begin()), std::make_move_iterator(b.h.end()));
            return a;
        }
        }
    }

    static MassMeasure forward(const N& n, const std::vector<Message>& messages, std::size_t offset,
                               const MassMeasure& mu)
    {
        if (mu.factors.size() != n.domain.size())
            throw DimensionError("lens forward: expected a measure with " + std::to_string(n.domain.size()) +
                                 " factors, got " + std::to_string(mu.factors.size()));
        switch (n.kind) {
        case N::Kind::primitive: {
            const Message& m = messages.at(offset);
            if (m.label != n.label)
                throw ValidationError("lens forward: message \"" + m.label + "\" was not emitted for edge \"" +
                                      n.label + "\"");
            return forward_map(*n.kappa, m, mu);
        }
        case N::Kind::serial: {
            const MassMeasure mid = forward(*n.left, messages, offset, mu);
            if (mid.degenerate)
                return mid;
            return forward(*n.right, messages, offset + n.left->messages, mid);
        }
        case N::Kind::parallel:
        default: {
            const auto split = static_cast<std::ptrdiff_t>(n.left->domain.size());
            MassMeasure a_in;
            a_in.factors.assign(mu.factors.begin(), mu.factors.begin() + split);
            MassMeasure b_in;
            b_in.factors.assign(mu.factors.begin() + split, mu.factors.end());
            const MassMeasure a = forward(*n.left, messages, offset, a_in);
            const MassMeasure b = forward(*n.right, messages, offset + n.left->messages, b_in);
            MassMeasure out;
            out.factors = a.factors;
            out.factors.insert(out.factors.end(), b.factors.begin(), b.factors.end());
            out.mass = mu.mass * a.mass * b.mass;
            out.degenerate = a.degenerate || b.degenerate;
            return out;
        }
        }
    }
};

LensBackward Lens::backward(const FactoredH& h) const { return LensRunner::backward(*node_, h); }

MassMeasure Lens::forward(const std::vector<Message>& messages, const MassMeasure& mu) const
{
    if (messages.size() != node_->messages)
        throw ValidationError("lens forward: expected " + std::to_string(node_->messages) + " messages, got " +
                              std::to_string(messages.size()));
    if (mu.degenerate)
        return mu;
    return LensRunner::forward(*node_, messages, 0, mu);
}

} // namespace bffg
