#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adaptermix {

/// Tensor shape disagreement. Messages name both offending shapes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Row/element index outside the valid range. Messages name the value.
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Unknown token or speaker id.
struct IdError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// A precondition of the API was broken (non-scalar loss, missing grad, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Operation applied in the wrong object state (e.g. double adapter insertion).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// A configuration field has an invalid value. Messages name the field.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Feature dimension too small for the operation (layer norm over one element).
struct DegenerateDimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numerically meaningless input (zero vector cosine, empty frame overlap).
struct DegenerateInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A data split cannot satisfy the requested budget.
struct BudgetError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Training loss became non-finite; remembers the offending step.
struct DivergenceError : std::runtime_error {
  DivergenceError(std::size_t at_step, const std::string& msg)
      : std::runtime_error(msg), step(at_step) {}
  std::size_t step;
};

}  // namespace adaptermix
