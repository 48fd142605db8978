#ifndef BFFG_DRIFT_REGISTRY_HPP
#define BFFG_DRIFT_REGISTRY_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "bffg/kernel.hpp"

namespace bffg {

/// A drift looked up by name, with the linear drift B x + beta used for its auxiliary process.
struct RegisteredDrift {
    TimeStateDrift drift;
    std::size_t dim = 0;
    Matrix B;
    Vector beta;
};

/// Known names:
///   "tanh_mixing" (params theta1, theta2): b(x) = tanh.(A x), A = [[-theta1, theta1], [theta2, -theta2]],
///       auxiliary drift A x.
///   "ornstein_uhlenbeck" (params lambda, mu_1..mu_d): b(x) = -lambda (x - mu), exact linear drift.
/// Throws ValidationError for unknown names or wrong parameter counts.
RegisteredDrift make_drift(const std::string& name, const std::vector<double>& params);

std::vector<std::string> drift_names();

} // namespace bffg

#endif // BFFG_DRIFT_REGISTRY_HPP
