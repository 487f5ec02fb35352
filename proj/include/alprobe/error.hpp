#pragma once

#include <stdexcept>
#include <string>

namespace alprobe {

// Input errors map to exit code 1, numeric/validation errors to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class EmptySentenceError : public Error {
 public:
  using Error::Error;
};

class TargetNotFoundError : public Error {
 public:
  using Error::Error;
};

class TargetTruncatedError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class UndefinedCorrelationError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateVarianceError : public NumericError {
 public:
  using NumericError::NumericError;
};

class InsufficientDataError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ValidationError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace alprobe
