#pragma once

#include <stdexcept>
#include <string>

namespace cutoff {

/// Input rejected before any numerics ran (bad parameters, bad config).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical engine failed: non-convergence, scheme failure, blow-up.
class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite evaluator output; the potential itself is mis-specified.
class NonFiniteError : public EngineError {
 public:
  using EngineError::EngineError;
};

}  // namespace cutoff
