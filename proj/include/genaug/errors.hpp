#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace genaug {

// Base for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/matrix dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid user-supplied configuration or option value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API precondition violated (non-scalar loss, unreachable graph, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// File read/write failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Sample bank queried for a source id it does not hold.
class MissingVariantError : public Error {
 public:
  using Error::Error;
};

// Input that is identically constant (zero after centering, zero variance).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Embedding with zero norm where a unit direction is required.
class NormalizationError : public Error {
 public:
  using Error::Error;
};

// Too few examples for a statistical procedure.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Operation would produce NaN (log of non-positive, divide by zero, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training hit a non-finite loss. Carries the diagnostic context.
class NumericalAbort : public Error {
 public:
  NumericalAbort(const std::string& msg, long step, double lr,
                 std::vector<double> loss_trace)
      : Error(msg), step(step), lr(lr), loss_trace(std::move(loss_trace)) {}

  long step = -1;
  double lr = 0.0;
  std::vector<double> loss_trace;
};

}  // namespace genaug
