#ifndef BFFG_ERRORS_HPP
#define BFFG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bffg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model or input that violates a structural invariant (tree shape, SPD, ranges).
class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: non-SPD matrix after jitter, ODE blow-up, zero denominators.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Operation requested for a kernel/function kind that does not support it.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// MCMC aborted after too many consecutive degenerate proposals.
class StallError : public Error {
public:
    using Error::Error;
};

} // namespace bffg

#endif // BFFG_ERRORS_HPP
