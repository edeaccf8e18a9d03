#pragma once

#include <stdexcept>
#include <string>

namespace cwave {

/// Raised when a diagonalizable operator has a (near) zero symbol.
class SingularOperatorError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when a configuration is valid syntactically but cannot be run
/// (stability check failure, off-node point source, unsupported data).
class RejectedConfiguration : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The requested right-hand side variant needs data the source cannot give.
class UnsupportedVariant : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Broken internal invariant (e.g. a tridiagonal pivot that can never vanish did).
class InternalError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

#define CWAVE_REQUIRE(cond, ExcType, msg) \
    do {                                  \
        if (!(cond)) throw ExcType(msg);  \
    } while (false)

} // namespace cwave
