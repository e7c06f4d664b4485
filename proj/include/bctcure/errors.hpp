#pragma once

#include <stdexcept>
#include <string>

namespace bctcure {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A root-finder or iterative solver failed to bracket or converge.
class NoConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The objective produced NaN where a finite value is required.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The SQH penalty was stepped up too many times without acceptance.
class StallError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The data cannot support the requested computation (empty group, etc).
class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files (CSV, theta files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration. `field` names the offending key when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Every task of a batch (MC replications, bootstrap resamples) failed,
// or more failed than the batch tolerates.
class AggregateFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bctcure
