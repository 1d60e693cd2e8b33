#include "bbvi/config.hpp"

#include <cmath>
#include <sstream>

#include "bbvi/errors.hpp"

namespace bbvi {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + value + "'");
}

GaussianStructure parse_structure(const std::string& value) {
  if (value == "identity") return GaussianStructure::Identity;
  if (value == "diag_nonidentity") return GaussianStructure::DiagNonIdentity;
  if (value == "uniform_corr") return GaussianStructure::UniformCorr;
  if (value == "banded_corr") return GaussianStructure::BandedCorr;
  throw ConfigError("target", "unknown target structure '" + value + "'");
}

OptimizerKind parse_optimizer(const std::string& value) {
  if (value == "sgd") return OptimizerKind::Sgd;
  if (value == "rmsprop") return OptimizerKind::RmsProp;
  if (value == "adam") return OptimizerKind::Adam;
  if (value == "avg_rmsprop") return OptimizerKind::AvgRmsProp;
  if (value == "avg_adam") return OptimizerKind::AvgAdam;
  if (value == "ngd") return OptimizerKind::Ngd;
  if (value == "windowed_adagrad") return OptimizerKind::WindowedAdagrad;
  throw ConfigError("optimizer", "unknown optimizer '" + value + "'");
}

Algorithm parse_algorithm(const std::string& value) {
  if (value == "raabbvi") return Algorithm::Raabbvi;
  if (value == "faso") return Algorithm::Faso;
  if (value == "fixed_lr_baseline") return Algorithm::FixedLrBaseline;
  throw ConfigError("algorithm", "unknown algorithm '" + value + "'");
}

FamilyKind parse_family(const std::string& value) {
  if (value == "mean_field") return FamilyKind::MeanField;
  if (value == "full_rank") return FamilyKind::FullRank;
  throw ConfigError("family", "unknown family '" + value + "'");
}

void validate(const RunConfig& c) {
  if (c.target.dim < 1) throw ConfigError("dim", "must be a positive integer");
  if (!(c.target.corr > 0.0 && c.target.corr < 1.0)) throw ConfigError("corr", "must lie in (0, 1)");
  if (!(c.rho > 0.0 && c.rho < 1.0)) throw ConfigError("rho", "must lie in (0, 1)");
  if (!(c.gamma0 > 0.0)) throw ConfigError("gamma0", "must be positive");
  if (!(c.xi > 0.0)) throw ConfigError("xi", "must be positive");
  if (!(c.tau > 0.0)) throw ConfigError("tau", "must be positive");
  if (c.epsilon0 && !(*c.epsilon0 > 0.0)) throw ConfigError("epsilon0", "must be positive");
  if (c.mc_samples < 1) throw ConfigError("mc_samples", "must be a positive integer");
  if (c.w_min < 1) throw ConfigError("w_min", "must be a positive integer");
  if (c.k0 < 1) throw ConfigError("k0", "must be a positive integer");
  if (c.k_max < 1) throw ConfigError("k_max", "must be a positive integer");
  if (!(c.fixed_gamma > 0.0)) throw ConfigError("fixed_gamma", "must be positive");
  if (!(c.epsilon_decay > 0.0)) throw ConfigError("epsilon_decay", "must be positive");
}

}  // namespace

void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "target")
    c.target.structure = parse_structure(value);
  else if (key == "dim")
    c.target.dim = static_cast<int>(parse_long(key, value));
  else if (key == "corr")
    c.target.corr = parse_double(key, value);
  else if (key == "family")
    c.family = parse_family(value);
  else if (key == "optimizer")
    c.optimizer = parse_optimizer(value);
  else if (key == "algorithm")
    c.algorithm = parse_algorithm(value);
  else if (key == "gamma0")
    c.gamma0 = parse_double(key, value);
  else if (key == "w_min")
    c.w_min = parse_long(key, value);
  else if (key == "xi")
    c.xi = parse_double(key, value);
  else if (key == "tau")
    c.tau = parse_double(key, value);
  else if (key == "epsilon0")
    c.epsilon0 = parse_double(key, value);
  else if (key == "rho")
    c.rho = parse_double(key, value);
  else if (key == "mc_samples")
    c.mc_samples = static_cast<int>(parse_long(key, value));
  else if (key == "k0")
    c.k0 = parse_long(key, value);
  else if (key == "k_max")
    c.k_max = parse_long(key, value);
  else if (key == "seed")
    c.seed = static_cast<std::uint64_t>(parse_long(key, value));
  else if (key == "fixed_gamma")
    c.fixed_gamma = parse_double(key, value);
  else if (key == "epsilon_decay")
    c.epsilon_decay = parse_double(key, value);
  else if (key == "warm_start_rmsprop")
    c.warm_start_rmsprop = parse_bool(key, value);
  else if (key == "out")
    c.out = value;
  else
    throw ConfigError(key, "unknown configuration key");
  validate(c);
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_number), "expected key=value");
    apply_override(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate(config);
  return config;
}

const char* to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::RmsProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::AvgRmsProp: return "avg_rmsprop";
    case OptimizerKind::AvgAdam: return "avg_adam";
    case OptimizerKind::Ngd: return "ngd";
    case OptimizerKind::WindowedAdagrad: return "windowed_adagrad";
  }
  return "?";
}

const char* to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Raabbvi: return "raabbvi";
    case Algorithm::Faso: return "faso";
    case Algorithm::FixedLrBaseline: return "fixed_lr_baseline";
  }
  return "?";
}

const char* to_string(FamilyKind family) {
  return family == FamilyKind::MeanField ? "mean_field" : "full_rank";
}

const char* to_string(GaussianStructure structure) {
  switch (structure) {
    case GaussianStructure::Identity: return "identity";
    case GaussianStructure::DiagNonIdentity: return "diag_nonidentity";
    case GaussianStructure::UniformCorr: return "uniform_corr";
    case GaussianStructure::BandedCorr: return "banded_corr";
  }
  return "?";
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "target = " << to_string(c.target.structure) << "\n";
  out << "dim = " << c.target.dim << "\n";
  out << "corr = " << c.target.corr << "\n";
  out << "family = " << to_string(c.family) << "\n";
  out << "optimizer = " << to_string(c.optimizer) << "\n";
  out << "algorithm = " << to_string(c.algorithm) << "\n";
  out << "gamma0 = " << c.gamma0 << "\n";
  out << "w_min = " << c.w_min << "\n";
  out << "xi = " << c.xi << "\n";
  out << "tau = " << c.tau << "\n";
  if (c.epsilon0) out << "epsilon0 = " << *c.epsilon0 << "\n";
  out << "rho = " << c.rho << "\n";
  out << "mc_samples = " << c.mc_samples << "\n";
  out << "k0 = " << c.k0 << "\n";
  out << "k_max = " << c.k_max << "\n";
  out << "seed = " << c.seed << "\n";
  out << "fixed_gamma = " << c.fixed_gamma << "\n";
  out << "epsilon_decay = " << c.epsilon_decay << "\n";
  out << "warm_start_rmsprop = " << (c.warm_start_rmsprop ? "true" : "false") << "\n";
  out << "out = " << c.out << "\n";
  return out.str();
}

}  // namespace bbvi
