#pragma once

#include <stdexcept>
#include <string>

namespace bk {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A documented precondition of an operation was violated by the caller.
/// CLI maps this to exit code 4.
struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what) : Error(what) {}
};

/// A numeric budget was exhausted: scan caps, simulation horizons,
/// bit-length caps that cannot be demoted soundly, non-terminating searches.
/// CLI maps this to exit code 3.
struct OverflowError : Error {
  explicit OverflowError(const std::string& what) : Error(what) {}
};

/// Malformed configuration, CLI arguments, or input files.
/// CLI maps this to exit code 2.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Throw PreconditionError with message `msg` unless `cond` holds.
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PreconditionError(msg);
}

}  // namespace bk
