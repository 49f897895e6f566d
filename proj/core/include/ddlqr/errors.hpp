#pragma once

#include <stdexcept>
#include <string>

namespace ddlqr {

// Malformed configs, schema violations, bad CLI arguments. CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Runtime numerical failures (rank loss, instability, divergence). CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotHurwitzError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficientError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularSystemError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnstableSpectrumError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateEta0Error : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientExcitationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotObservableError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class PlacementFailedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotStabilizingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnstableClosedLoopError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InconsistentInitialConditionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientTailError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace ddlqr
