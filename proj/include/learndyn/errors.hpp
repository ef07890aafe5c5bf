#ifndef LEARNDYN_ERRORS_HPP
#define LEARNDYN_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace learndyn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Out-of-range player/action indices, malformed profiles, nonpositive temperatures.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// An operation was called on an object that lacks something it needs
/// (no potential oracle, reducible cost function, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The joint-action space (or a derived table) is larger than the configured cap.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::size_t requested, std::size_t cap)
      : Error(what + " (requested " + std::to_string(requested) + ", cap " +
              std::to_string(cap) + ")"),
        requested_(requested),
        cap_(cap) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t requested_;
  std::size_t cap_;
};

/// Linear solve failed, iterative method did not converge, or a residual check failed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The game has two Hamming-neighbors with equal potential; the analysis
/// operations require strictly distinct potentials along every edge.
class RejectedGameError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant that the theory guarantees did not hold.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration or fixture document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace learndyn

#endif  // LEARNDYN_ERRORS_HPP
