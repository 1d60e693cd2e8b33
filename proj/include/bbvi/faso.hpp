#pragma once

// Fixed-learning-rate automated stochastic optimization: per-step descent,
// adaptive stationarity detection, and iterate averaging gated on MCSE with a
// cost-aware recheck schedule.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bbvi/diagnostics.hpp"
#include "bbvi/gradient.hpp"
#include "bbvi/optim.hpp"
#include "bbvi/rng.hpp"
#include "bbvi/variational.hpp"

namespace bbvi {

// Recheck window growth factor 1 + (1 + r)^{-1/2}; 2 at r = 0, tends to 1.
double chi_of_r(double r);

// Worst-case total-cost overhead of the chi(r) schedule relative to checking
// only at the two ideal windows: (2 + r + 2 sqrt(1 + r)) / (1 + r).
double schedule_cost_factor(double r);

struct RecheckSchedule {
  double cost_ratio = 0.0;  // optimization cost / per-iterate check cost
  double growth = 2.0;      // chi(cost_ratio)
  long next_window = 0;

  void grow() {
    next_window = std::max(next_window + 1,
                           static_cast<long>(std::ceil(growth * static_cast<double>(next_window))));
  }
};

struct McseGateResult {
  bool pass = false;
  double mean_relative_mcse = 0.0;  // mean of the (scaled) per-dimension MCSEs
  double ess_min = 0.0;
  Eigen::VectorXd ess;
  Eigen::VectorXd mcse;  // tau entries divided by exp(psi-bar) for mean-field
  double op_count = 0.0;
};

// Mean-field: mean of MCSE(tau_i)/sigma_hat_i and mean of MCSE(psi_i) must
// both fall below epsilon, with sigma_hat from the window-average psi. Other
// families use the plain mean over all coordinates. Every dimension must also
// reach the effective-sample-size floor.
McseGateResult mcse_gate(const IterateHistory& history, long window, const FamilyLayout& family,
                         double epsilon, double ess_floor = 50.0,
                         ExecPolicy policy = ExecPolicy::Parallel, double max_ess_ratio = 1.0);

struct CheckRecord {
  long step = 0;
  std::string phase;  // "rhat" or "mcse"
  double rhat_max = std::numeric_limits<double>::quiet_NaN();
  long w_opt = 0;
  double mean_mcse = std::numeric_limits<double>::quiet_NaN();
  double ess_min = std::numeric_limits<double>::quiet_NaN();
};
using CheckSink = std::function<void(const CheckRecord&)>;

struct FasoConfig {
  double gamma = 0.1;
  long w_min = 200;
  double epsilon = 0.1;
  long k_max = 100000;
  OptimizerKind optimizer = OptimizerKind::AvgAdam;
  OptimizerHyper hyper;
  FamilyLayout family;
  double rhat_threshold = 1.1;
  double ess_floor = 50.0;
  long check_interval = 0;  // 0: w_min / 2
  double max_ess_ratio = 1.0;
  ExecPolicy policy = ExecPolicy::Parallel;
  long global_step_offset = 0;  // added to steps in emitted records
  // Flop estimate for one optimization iteration; paired with the measured
  // per-iterate cost of the first MCSE check to set the recheck growth.
  double op_cost_per_iteration = 0.0;
};

struct FasoResult {
  long iterations_used = 0;
  Eigen::VectorXd iterate_average;
  bool success = false;
  long k_conv = -1;       // epoch-local step at which stationarity was declared
  long final_window = 0;  // iterates averaged
  double measured_cost_ratio = 0.0;
  std::vector<DiagnosticsReport> diagnostics_trace;
  std::optional<long> error_step;
  std::string error_message;
};

FasoResult run_faso(const FasoConfig& config, const Eigen::VectorXd& lambda0,
                    const GradientSource& source, RngStream& rng, const CheckSink& sink = {});

FasoResult run_faso(const FasoConfig& config, const Eigen::VectorXd& lambda0,
                    const TargetModel& target, int num_samples, RngStream& rng,
                    const CheckSink& sink = {});

}  // namespace bbvi
