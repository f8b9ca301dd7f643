#pragma once

#include <stdexcept>
#include <string>

namespace mvop {

// Base for every error raised by the library. Callers that only care about
// "something failed" catch this; the subclasses exist so tests and the CLI
// can tell numerical failures from bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad inputs: shapes, ranges, malformed configuration or data.
class InputError : public Error {
 public:
  using Error::Error;
};

// Failures that originate in the numerics (degenerate correlation, a cell
// assembled to a clearly negative probability, a non-finite likelihood).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class InvalidBound : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateCorrelation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InvalidCell : public InputError {
 public:
  using InputError::InputError;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

class InvalidParameter : public InputError {
 public:
  using InputError::InputError;
};

class StageOutOfRange : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateOutcome : public InputError {
 public:
  using InputError::InputError;
};

class BadStart : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InvalidLikelihood : public InputError {
 public:
  using InputError::InputError;
};

class IncompleteResponse : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class DataError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace mvop
