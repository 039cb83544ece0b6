#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dpcmf {

// Base of all toolkit errors. `reason()` is a stable machine-readable token;
// what() starts with the same token so single-line diagnostics stay parsable.
class Error : public std::runtime_error {
 public:
  Error(std::string reason, const std::string& detail)
      : std::runtime_error(detail.empty() ? reason : reason + ": " + detail),
        reason_(std::move(reason)) {}

  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

// Invalid configuration or hyperparameters. CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable, malformed, or empty input data. CLI exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: singular systems, contract violations. CLI exit code 4.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class SingularSystemError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// An input reached the noise mechanism without the clipping it assumes.
// Always a hard failure; proceeding would invalidate the privacy accounting.
class SensitivityViolationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ContractViolationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace dpcmf
