#pragma once

#include <stdexcept>
#include <string>

namespace nelson {

/// Invalid or inconsistent configuration / parameters.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Blow-up, instability, loss of unitarity, solver breakdown.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Basis dimension over the memory budget, or a truncation that is too lossy.
class BudgetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace nelson
