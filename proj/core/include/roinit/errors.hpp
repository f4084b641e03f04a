#pragma once

#include <stdexcept>
#include <string>

namespace roinit {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rotation logarithm requested within 1e-6 rad of the pi branch cut (3D only).
class AngleNearPi : public Error {
 public:
  using Error::Error;
};

/// Matrix is rank-deficient beyond tolerance; no meaningful rotation projection.
class DegenerateMatrix : public Error {
 public:
  using Error::Error;
};

/// State, scenario, or builder combination does not match the requested mode.
class ModeMismatch : public Error {
 public:
  using Error::Error;
};

/// Constraint basis or solution layout does not match the problem layout.
class LayoutMismatch : public Error {
 public:
  using Error::Error;
};

/// Scenario file could not be parsed or failed validation; message names the field.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Scenario file carries an unsupported schema version.
class SchemaVersionMismatch : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling gave up (e.g. 100 collinear anchor sets in a row).
class SamplerExhausted : public Error {
 public:
  using Error::Error;
};

/// Constraint discovery was asked to run with too few samples.
class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

/// Feasible samples failed to span the moment space; discovery result untrusted.
class RankDeficientSampling : public Error {
 public:
  using Error::Error;
};

/// Dominant eigenvector has a vanishing homogenization slot; extraction impossible.
class HomogenizationCollapse : public Error {
 public:
  using Error::Error;
};

}  // namespace roinit
