#pragma once

#include <stdexcept>
#include <string>

namespace drbm {

/// Parameter outside the admissible domain of the model.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Request would exceed a configured compute or memory budget.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure left its domain of validity (e.g. an eigenvalue at or above 1).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drbm
