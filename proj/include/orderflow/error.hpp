#pragma once

#include <stdexcept>
#include <string>

namespace orderflow {

// Each class maps onto one CLI exit code (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// beta >= 1 in standard mode, mu outside its range, ...
class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Too few windows / points for an estimate.
class EstimationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline int exit_code(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const IoError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 3;
}

}  // namespace orderflow
