#pragma once

#include <stdexcept>
#include <string>

namespace hhp {

/// Bad argument to an otherwise well-configured call (dimension mismatch,
/// non-positive time, non-monotone time node, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A run or geometry configuration that cannot be executed as stated.
/// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quadrature non-convergence, poisoned fields, unsatisfiable fits.
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation applied outside its mathematical domain, e.g. a fractional
/// power of a negative value.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A global-existence budget whose integral diverges for the requested (p, gamma, q).
class InfeasibleBudget : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace hhp
