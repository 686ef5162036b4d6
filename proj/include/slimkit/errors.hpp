#pragma once

#include <stdexcept>
#include <string>

namespace slimkit {

// Error taxonomy used library-wide. The CLI maps ConfigError to exit code 1;
// a budget that cannot be met is not an error (see RunResult::outcome).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shapes or structure do not line up (dimension mismatch, ragged data).
struct StructuralError : Error {
  using Error::Error;
};

// A value lies outside its permitted domain (bad knob value, empty dataset,
// non-positive learning rate, ...).
struct DomainError : Error {
  using Error::Error;
};

// Bad wiring: unknown meter/knob ids, duplicate rule registration, malformed
// experiment configs, policies selecting knobs that do not exist.
struct ConfigError : Error {
  using Error::Error;
};

// A rule failed internally while transforming a model.
struct RuleError : Error {
  using Error::Error;
};

}  // namespace slimkit
