// Error taxonomy shared across the library. Configuration and capacity
// problems are recoverable runtime errors; contract violations indicate a
// caller bug and derive from logic_error.
#pragma once

#include <stdexcept>
#include <string>

namespace wmgen {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SetupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyFeedbackError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct TrainingDivergence : std::runtime_error {
  int step;
  TrainingDivergence(int step_index, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step_index) + ")"),
        step(step_index) {}
};

}  // namespace wmgen
