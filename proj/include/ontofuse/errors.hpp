#pragma once

#include <stdexcept>
#include <string>

namespace ontofuse {

// Error taxonomy, mapped to CLI exit codes: ConfigError -> 3, UsageError -> 2,
// everything else -> 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct UsageError : Error {
  using Error::Error;
};

// Input file does not parse against its documented schema.
struct FormatError : Error {
  using Error::Error;
};

// Parsed data violates a structural invariant (dangling edge, missing class, ...).
struct ValidationError : Error {
  using Error::Error;
};

struct LookupError : Error {
  using Error::Error;
};

struct TemplateError : Error {
  using Error::Error;
};

struct LengthError : Error {
  using Error::Error;
};

// Caller broke an API contract (shape mismatch, unequal lengths, ...).
struct ContractViolation : Error {
  using Error::Error;
};

// Non-finite loss or similar numerical breakdown during training.
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace ontofuse
