#pragma once

#include <stdexcept>
#include <string>

namespace uwauth {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller broke an interface contract (dimension mismatch, missing field).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Covariance could not be factored even after diagonal jitter.
class IllConditionedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Signal derivative carries no Fisher information (zero quadratic form).
class DegenerateSignalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive quadrature hit its recursion limit. Carries the best estimate.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double partial)
      : std::runtime_error(what), partial_(partial) {}
  double partial_estimate() const noexcept { return partial_; }

 private:
  double partial_;
};

/// Configuration document failed schema or invariant checks.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uwauth
