#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tempflow {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shape, size, range).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced during a computation. `where` names the layer, parameter
// entry, transition or step at which it was detected.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::string where);
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// Training loop diverged; carries the step/iteration index.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::size_t index);
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// A statistic or schedule is undefined for the given input (zero variance,
// all-zero noise, vanishing gradient).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration; `key` is the dotted key path when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {});
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint does not match the requested network.
class LoadError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace tempflow
