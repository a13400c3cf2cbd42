#pragma once

#include <stdexcept>
#include <string>

namespace nmfuse {

// Malformed input layout: missing header, unknown/duplicate/missing columns,
// non-numeric fields. Reported by the CLI with exit code 2.
class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid run configuration (flags, scenario files, guarantee parameters).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Well-formed input whose content cannot be used (non-finite scores,
// too few samples, corrupted persisted state).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative routine failed to meet its tolerance.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmfuse
