#pragma once

// Experiment runner: executes the configured algorithm on the configured
// target and writes a JSONL trace plus a one-row CSV summary.

#include <string>

#include <Eigen/Core>

#include "bbvi/config.hpp"

namespace bbvi {

struct ExperimentSummary {
  long terminal_step = 0;
  double sqrt_skl_to_opt = std::numeric_limits<double>::quiet_NaN();
  double rel_mean_error = std::numeric_limits<double>::quiet_NaN();
  double rel_sd_error = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
  int exit_code = 0;
  std::string reason;
  std::string jsonl_path;
  std::string csv_path;
  Eigen::VectorXd final_params;
};

ExperimentSummary run_experiment(const RunConfig& config);

}  // namespace bbvi
