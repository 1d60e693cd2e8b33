#pragma once

// Flat key=value run configuration with '#' comments. Unknown keys are
// rejected; missing keys take the documented defaults.

#include <cstdint>
#include <optional>
#include <string>

#include "bbvi/optim.hpp"
#include "bbvi/targets.hpp"
#include "bbvi/variational.hpp"

namespace bbvi {

enum class Algorithm { Raabbvi, Faso, FixedLrBaseline };

struct RunConfig {
  GaussianTargetSpec target;
  FamilyKind family = FamilyKind::MeanField;
  OptimizerKind optimizer = OptimizerKind::AvgAdam;
  Algorithm algorithm = Algorithm::Raabbvi;
  double gamma0 = 0.3;
  long w_min = 200;
  double xi = 0.1;
  double tau = 1.0;
  std::optional<double> epsilon0;  // tracks xi unless set explicitly
  double rho = 0.5;
  int mc_samples = 10;
  long k0 = 1000;
  long k_max = 100000;
  std::uint64_t seed = 1;
  double fixed_gamma = 0.1;  // learning rate for faso / fixed-rate baselines
  double epsilon_decay = 1.0;
  bool warm_start_rmsprop = false;
  std::string out = "run";

  double epsilon() const { return epsilon0.value_or(xi); }
  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& text);

// Canonical key order; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& config);

void apply_override(RunConfig& config, const std::string& key, const std::string& value);

const char* to_string(OptimizerKind kind);
const char* to_string(Algorithm algorithm);
const char* to_string(FamilyKind family);
const char* to_string(GaussianStructure structure);

}  // namespace bbvi
