#pragma once

#include <stdexcept>
#include <string>

namespace lmspde {

/// Invalid configuration or model specification. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition of a pure numerical routine (length mismatch, bad domain).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeasurementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// B_{Nx} is (numerically) singular: too few active locations around x.
class DegenerateDesignError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// Raised when a Monte Carlo cell loses more than the tolerated share of replicates.
class StudyInvalidError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lmspde
