#ifndef BFFG_COMPOSE_HPP
#define BFFG_COMPOSE_HPP

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bffg/hfun.hpp"
#include "bffg/kernel.hpp"
#include "bffg/message.hpp"

namespace bffg {

/// h on a product space, given factor by factor (a single factor for plain spaces).
using FactoredH = std::vector<HFun>;

/// A product of normalized measures carrying a total nonnegative mass.
struct MassMeasure {
    std::vector<Measure> factors;
    double mass = 1.0;
    /// Set when a forward step produced zero weight; the factors are then meaningless.
    bool degenerate = false;

    static MassMeasure single(Measure m, double mass = 1.0);
};

/// Backward half of F(kappa, kappa_tilde): returns the message m(x, y) = h(y) / (kappa_tilde h)(x)
/// and the pullback kappa_tilde h. Throws for incompatible kinds.
std::pair<Message, HFun> backward_map(const Kernel& kappa_tilde, const HFun& h, std::string label = {});

/// Forward half of F(kappa, kappa_tilde): moves the mass-measure across the edge.
///
/// The weight is w = integral of (kappa h)(x) / (kappa_tilde h)(x) mu(dx) and the result is
/// (mass * w) times the normalized guided pushforward. Finite kernels and linear-Gaussian
/// kernels (with Gaussian or point-mass input) are supported.
MassMeasure forward_map(const Kernel& kappa, const Message& m, const MassMeasure& mu);

struct LensBackward {
    std::vector<Message> messages;
    FactoredH h;
};

/// The pair F(kappa, kappa_tilde) and its serial and parallel compositions.
///
/// Lenses are immutable; composites share their parts.
class Lens {
public:
    static Lens primitive(Kernel kappa, Kernel kappa_tilde, std::string label);
    /// F(kappa, kappa): the exact lens, whose forward masses are 1.
    static Lens exact(Kernel kappa, std::string label);

    /// Number of product factors of the domain (equal to that of the codomain).
    std::size_t arity() const;
    std::size_t message_count() const;
    /// Dimension (states or state dimension) of each domain factor.
    std::vector<std::size_t> domain() const;
    std::vector<std::size_t> codomain() const;

    /// Runs the backward maps right to left, stacking the messages in forward order.
    LensBackward backward(const FactoredH& h) const;
    /// Runs the forward maps left to right, consuming the messages of a backward run.
    MassMeasure forward(const std::vector<Message>& messages, const MassMeasure& mu) const;

    friend Lens lens_serial(const Lens& l1, const Lens& l2);
    friend Lens lens_parallel(const Lens& l1, const Lens& l2);

private:
    struct Node;
    friend struct LensRunner;
    explicit Lens(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

/// l1 then l2 (forward direction). Throws DimensionError if the spaces do not match.
Lens lens_serial(const Lens& l1, const Lens& l2);
/// l1 and l2 side by side on the product space, for product-form h.
Lens lens_parallel(const Lens& l1, const Lens& l2);

} // namespace bffg

#endif // BFFG_COMPOSE_HPP
