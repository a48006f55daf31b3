#pragma once

#include <stdexcept>
#include <string>

namespace skipfold {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of operands do not line up (matrix products, block widths, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A subset index is out of range, duplicated, or unordered.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// The hidden width exceeds the exhaustive-search bound.
class WidthLimitError : public Error {
 public:
  using Error::Error;
};

/// The submatrix condition does not hold for the requested subset.
class ConditionViolatedError : public Error {
 public:
  ConditionViolatedError(const std::string& message, double residual)
      : Error(message), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_ = 0.0;
};

/// The activation does not support the requested operation.
class UnsupportedActivationError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be invertible is singular or too ill-conditioned.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// A bounded internal retry loop was exhausted.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace skipfold
