#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace snorm {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid tensor shape (zero-sized or overflowing dimension, rank mismatch).
struct ShapeError : Error {
  using Error::Error;
};

// Invalid value passed for a configuration or function parameter.
struct ParamError : Error {
  using Error::Error;
};

// A partition where every group is a singleton combined with a centered
// moment: refusing beats silently zeroing the signal.
struct DegeneratePartitionError : ParamError {
  using ParamError::ParamError;
};

// Caller broke an API contract (mismatched forward/backward pairing,
// stats layout not matching the tensor, sigma <= 0).
struct ContractError : Error {
  using Error::Error;
};

// Operation not legal in the current layer/model state (eval before any
// training batch, commit while in eval mode, ...).
struct StateError : Error {
  using Error::Error;
};

// Evaluation reached a timestep a time-specific binding never trained.
struct UnseenTimestepError : StateError {
  using StateError::StateError;
};

// Malformed data file; message names the byte offset where parsing failed.
struct FormatError : Error {
  using Error::Error;
};

// Invalid experiment configuration; message names the offending key.
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite loss during training; carries the failing batch index.
struct NumericError : Error {
  NumericError(const std::string& msg, long batch_index)
      : Error(msg), batch_index(batch_index) {}
  long batch_index;
};

// Non-fatal diagnostics (hyperparameter sum violations, no-op commits).
// Default handler writes to stderr; tests may install a capture.
using WarningHandler = std::function<void(const std::string&)>;
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace snorm
