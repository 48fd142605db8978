#ifndef BFFG_MESSAGE_HPP
#define BFFG_MESSAGE_HPP

#include <cstddef>
#include <string>

#include "bffg/hfun.hpp"

namespace bffg {

/// What one backward step leaves for the forward step over the same edge:
/// the incoming h and its pullback (kappa h), giving m(x, y) = h(y) / (kappa h)(x).
struct Message {
    std::string label;
    HFun h;
    HFun pulled;

    /// m(x, y) on finite spaces. Throws NumericalError if (kappa h)(x) = 0.
    double operator()(std::size_t x, std::size_t y) const;
    /// log m(x, y) on Gaussian spaces.
    double log_value(const Vector& x, const Vector& y) const;
};

} // namespace bffg

#endif // BFFG_MESSAGE_HPP
