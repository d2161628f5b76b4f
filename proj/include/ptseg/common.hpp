#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ptseg {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor rank/extent mismatches. Messages name both offending shapes.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid argument values (counts < 1, non-scalar loss, ...).
struct ArgError : Error {
  using Error::Error;
};

/// Malformed files: bad magic, truncation, unparseable fields.
struct FormatError : Error {
  using Error::Error;
};

/// Semantically invalid data: label overflow, length mismatches, empty inputs.
struct DataError : Error {
  using Error::Error;
};

/// Optimizer or pipeline state not ready for the requested operation.
struct StateError : Error {
  using Error::Error;
};

/// Randomized search gave up (e.g. no valid window center found).
struct SamplingError : Error {
  using Error::Error;
};

enum class Precision { f32, f64 };

inline const char* to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

}  // namespace ptseg
