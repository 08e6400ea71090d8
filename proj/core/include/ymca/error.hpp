#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ymca {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector/matrix dimensions do not match what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A named entity (corner id, feature, file key) does not exist.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// An operation was requested in a mode it cannot support, e.g. an analytic
/// yield on a nonlinear evaluator.
class ModeError : public Error {
 public:
  using Error::Error;
};

/// Benchmark generation could not satisfy its family parameters.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Context or feature count exceeds what a surrogate can accept.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Linear algebra failed even after jitter escalation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A persisted document carries an unknown or mismatched schema version.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Meta-training produced a non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace ymca
