#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace bbvi {

// Caller-supplied arguments are malformed (shape or family mismatch, bad value).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The target returned a non-finite log density or gradient at a sampled point.
struct EstimatorError : std::runtime_error {
  EstimatorError(const std::string& what, Eigen::VectorXd theta_at)
      : std::runtime_error(what), theta(std::move(theta_at)) {}
  Eigen::VectorXd theta;
};

// Non-finite gradient fed to an optimizer; the caller aborts the epoch.
struct OptimizerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  ConfigError(std::string bad_key, const std::string& what)
      : std::runtime_error(bad_key + ": " + what), key(std::move(bad_key)) {}
  std::string key;
};

}  // namespace bbvi
