#pragma once

#include <stdexcept>
#include <string>

namespace gradhess {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad arguments, shapes, or configuration. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidInputError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class CalibrationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Numerical failure at run time. Maps to CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public NumericError {
 public:
  SingularMatrixError(const std::string& what, double pivot)
      : NumericError(what), pivot_(pivot) {}
  double pivot() const { return pivot_; }

 private:
  double pivot_;
};

class InsufficientBatchesError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, int epoch)
      : NumericError(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class CostGuardError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// File system and parsing problems. Maps to CLI exit code 4.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gradhess
