#pragma once

#include <stdexcept>
#include <string>

namespace aoi {

// Bad input to a pure function (negative time, unsorted grid, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A probability could not be evaluated (oracle or engine breakdown).
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The conditional-density recursion cannot represent the requested event,
// e.g. a threshold lies beyond the truncation half-width.
class QuadratureFailure : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

class CalibrationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FactorizationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aoi
