#pragma once

#include <stdexcept>

namespace plvc {

/// Base class for all plvc errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid construction arguments (bad knot range, unsupported degree).
struct InvalidDomainError : Error {
  using Error::Error;
};

/// Evaluation point outside the basis support in strict mode.
struct OutOfRangeError : Error {
  using Error::Error;
};

/// Dataset ingestion failure: missing column, non-finite cell, too few rows.
struct IngestionError : Error {
  using Error::Error;
};

/// Linear block unidentified: w lies in the varying-coefficient space.
struct CollinearityError : Error {
  using Error::Error;
};

/// Leave-one-out hat diagonal at 1: the candidate interpolates.
struct SaturationError : Error {
  using Error::Error;
};

/// No evaluable candidate in a selection grid.
struct SelectionError : Error {
  using Error::Error;
};

/// Kernel-weighted local design is singular.
struct LocalRankError : Error {
  using Error::Error;
};

/// Residual sum of squares not positive where a ratio requires it.
struct DegenerateFitError : Error {
  using Error::Error;
};

/// Bootstrap test could not complete (bad nesting, too many dropped replicates).
struct TestError : Error {
  using Error::Error;
};

/// Malformed run configuration.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace plvc
