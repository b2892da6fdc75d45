#pragma once

#include <stdexcept>

namespace qkd {

// Error taxonomy mirrored by the CLI exit codes:
// ConfigError -> 2, MathError -> 3, PlanError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration, file, or argument.
struct ConfigError : Error {
  using Error::Error;
};

// A numerical consistency check failed (isometry invariant, image check,
// normalization, space mismatch).
struct MathError : Error {
  using Error::Error;
};

// An attack plan is missing, malformed, or fails verification.
struct PlanError : Error {
  using Error::Error;
};

}  // namespace qkd
