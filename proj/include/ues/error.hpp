#pragma once

#include <stdexcept>

namespace ues {

// Base type for all library failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument values: empty input, non-finite entry, shape mismatch.
struct InvalidInput : Error {
  using Error::Error;
};

// Operation applied to a HeadBatch of the wrong task mode.
struct ModeMismatch : Error {
  using Error::Error;
};

// Invalid configuration value; the message names the offending key.
struct ConfigError : Error {
  using Error::Error;
};

// Hard-label query for a sample the threshold masked out.
struct MaskedSample : Error {
  using Error::Error;
};

// Non-finite loss or gradient during training.
struct DivergenceError : Error {
  using Error::Error;
};

// Truncated or tampered checkpoint / state stream.
struct CorruptStream : Error {
  using Error::Error;
};

}  // namespace ues
