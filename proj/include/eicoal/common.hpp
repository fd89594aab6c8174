#pragma once

#include <stdexcept>
#include <string>

namespace eicoal {

// Error taxonomy shared across the library. The CLI maps these to exit codes:
// UsageError/ConfigError -> 2, NumericalError/ConvergenceError -> 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A rejection budget ran out (usage-level failure, exit code 2).
struct RejectionBudgetError : ConfigError {
  using ConfigError::ConfigError;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t position)
      : std::runtime_error(msg + " (at character " + std::to_string(position) + ")"),
        pos(position) {}
  std::size_t pos;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvariantError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace eicoal
