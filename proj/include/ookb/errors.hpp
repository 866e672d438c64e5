#pragma once

#include <stdexcept>
#include <string>

namespace ookb {

// Base of everything this library throws. The CLI maps each subclass to an
// exit code (see tools/ookb.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing files, malformed input, inconsistent datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// An entity that cannot be given a vector (OOKB without auxiliary triplets,
// or unknown to every vocabulary).
class InferenceError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite values, shape mismatches inside the numeric core.
class NumericalFault : public Error {
 public:
  using Error::Error;
};

}  // namespace ookb
