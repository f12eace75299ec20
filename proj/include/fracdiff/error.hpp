#pragma once

#include <stdexcept>
#include <string>

namespace fracdiff {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied an argument outside the documented contract.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

/// Malformed or unsupported input file.
class ParseError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Base of failures that originate in floating point computation.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Elimination without pivoting met a (near-)zero pivot.
class PivotBreakdown : public NumericalError {
public:
  PivotBreakdown(std::size_t step, double pivot)
      : NumericalError("pivot breakdown at elimination step " +
                       std::to_string(step) + " (pivot " +
                       std::to_string(pivot) + ")"),
        step_{step} {}

  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

class NotStronglyConnected : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Fractional power requested on the open negative real axis.
class BranchCutError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class IllConditioned : public NumericalError {
public:
  using NumericalError::NumericalError;
};

}  // namespace fracdiff
