#pragma once

// Learning-rate-decrease scheduling and the inefficiency-index stopping rule:
// regression of per-epoch SKL increments on the learning rate, prediction of
// iterations needed at the next rate, and the outer optimization loop that
// ties it together.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bbvi/faso.hpp"
#include "bbvi/parallel.hpp"
#include "bbvi/rng.hpp"
#include "bbvi/targets.hpp"
#include "bbvi/variational.hpp"

namespace bbvi {

struct EpochRecord {
  int t = 0;
  double gamma = 0.0;
  long iterations = 0;  // iterations the epoch used (K_t)
  double delta = std::numeric_limits<double>::quiet_NaN();  // SKL to previous average, t >= 1
  Eigen::VectorXd average;
};

struct SklRegressionFit {
  double log_c_mean = 0.0;
  double kappa_mean = 1.0;
  double sigma_mean = 0.0;
  Eigen::MatrixXd posterior_draws;  // columns: log C, kappa, sigma
  bool fixed_kappa = true;
  bool used_fallback = false;  // sampler health gate failed; weighted least squares

  double log_c_sd() const;
  // Central posterior interval for log C at the given mass.
  std::pair<double, double> log_c_interval(double mass) const;
};

// w_t = (1 + (T - t)^2 / 9)^{-1/4} for t = 1..T; latest epoch gets weight 1.
Eigen::VectorXd regression_weights(int total_epochs);

// Posterior-mean fit of log delta_t = log C + 2 log(1/rho^kappa - 1)
// + 2 kappa log gamma_t + eta_t with per-point power weights, Cauchy(0,10)
// prior on log C, half-Cauchy(0,10) on sigma, and Uniform(0,1) on kappa when
// it is free. Sampled with adaptive random-walk Metropolis (4 chains); if any
// coordinate's split-Rhat exceeds 1.05 the fit falls back to weighted least
// squares with kappa clamped.
SklRegressionFit fit_skl_regression(const std::vector<EpochRecord>& records, double rho,
                                    bool fixed_kappa, RngStream& rng,
                                    ExecPolicy policy = ExecPolicy::Parallel);

// rho^kappa + xi / (sqrt(C) * gamma^kappa).
double estimate_rskl(const SklRegressionFit& fit, double gamma_t, double rho, double xi);

struct IterationFit {
  double alpha = 0.0;
  double beta = 0.0;
};

// Weighted least squares of log K_t = alpha log gamma_t + beta over records
// with t >= 1; needs at least two of them.
IterationFit fit_iteration_regression(const std::vector<EpochRecord>& records);

// gamma_next^alpha * e^beta when beta < 0, otherwise the current count.
double predict_next_iterations(const IterationFit& fit, double gamma_next, double k_curr);

struct TerminationDecision {
  double rskl_hat = 0.0;
  double ri_hat = 0.0;
  double inefficiency_hat = 0.0;
  double predicted_k_next = 0.0;
  bool terminate = false;
};

TerminationDecision decide_termination(double rskl_hat, double k_curr, double predicted_k_next,
                                       double k0, double tau);

struct RaabbviOptions {
  FamilyLayout family;
  OptimizerKind optimizer = OptimizerKind::AvgAdam;
  OptimizerHyper hyper;
  double gamma0 = 0.3;
  double rho = 0.5;
  double xi = 0.1;
  double tau = 1.0;
  double epsilon0 = 0.1;
  double epsilon_decay = 1.0;  // per-epoch multiplier on the MCSE threshold
  long w_min = 200;
  long k0 = 1000;
  long k_max = 100000;
  int mc_samples = 10;
  // Run plain RMSProp during epoch 0 only, then switch to the configured
  // optimizer. Off by default.
  bool warm_start_rmsprop = false;
  ExecPolicy policy = ExecPolicy::Parallel;
};

struct EpochTraceRecord {
  int t = 0;
  long step = 0;  // cumulative iterations at the end of the epoch
  double gamma = 0.0;
  long k_t = 0;
  double delta = std::numeric_limits<double>::quiet_NaN();
  double log_c_mean = std::numeric_limits<double>::quiet_NaN();
  double kappa_mean = std::numeric_limits<double>::quiet_NaN();
  double rskl_hat = std::numeric_limits<double>::quiet_NaN();
  double ri_hat = std::numeric_limits<double>::quiet_NaN();
  double inefficiency_hat = std::numeric_limits<double>::quiet_NaN();
  bool terminated = false;
};
using EpochSink = std::function<void(const EpochTraceRecord&)>;

struct RaabbviResult {
  Eigen::VectorXd final_params;
  std::vector<EpochRecord> epochs;
  std::vector<TerminationDecision> decisions;
  // "inefficiency", "max_iterations", "faso_failure", or "fit_error: ..."
  std::string terminated_reason;
  long total_iterations = 0;
  // Estimated sqrt SKL to the optimum from the last regression fit, for the
  // non-convergence warning; NaN when no fit happened.
  double estimated_error = std::numeric_limits<double>::quiet_NaN();
};

// When kappa is known to be 1 for the configured optimizer/family pair
// (averaged second-moment methods or plain SGD with the mean-field family),
// the regression fixes it there.
bool kappa_is_fixed(OptimizerKind optimizer, FamilyKind family);

RaabbviResult run_raabbvi(const RaabbviOptions& options, const TargetModel& target,
                          RngStream& rng, const CheckSink& check_sink = {},
                          const EpochSink& epoch_sink = {});

}  // namespace bbvi
