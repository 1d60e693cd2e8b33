#pragma once

// Fixed-learning-rate iterates form a homogeneous Markov chain; this module
// measures its stationarity: autocovariance-based ESS and MCSE, split-Rhat,
// the adaptive window search, and two alternative convergence detectors.

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bbvi/parallel.hpp"

namespace bbvi {

// Per-dimension iterate series for one learning-rate epoch. Append-only;
// stored column-wise so diagnostics scan contiguous memory.
class IterateHistory {
 public:
  explicit IterateHistory(int dim, long epoch_start_step = 0);

  void append(const Eigen::VectorXd& lambda);
  long size() const { return size_; }
  int dim() const { return dim_; }
  long epoch_start_step() const { return epoch_start_step_; }

  // Last `window` values of one coordinate.
  std::span<const double> tail(int coordinate, long window) const;
  Eigen::VectorXd tail_mean(long window) const;
  Eigen::VectorXd row(long index) const;

 private:
  int dim_;
  long epoch_start_step_;
  long size_ = 0;
  std::vector<std::vector<double>> cols_;
};

struct DiagnosticsReport {
  long step = 0;    // global step the check ran at
  long window = 0;
  Eigen::VectorXd rhat;  // per dimension; empty when the check skipped it
  Eigen::VectorXd ess;
  Eigen::VectorXd mcse;
};

// A zero-variance (exactly constant) series; stationary by convention.
bool degenerate(std::span<const double> series);

// K / (1 + 2 sum rho_k) with Geyer initial-positive-sequence truncation:
// autocorrelations are summed in (even, odd) lag pairs until the first
// non-positive pair sum. Clamped to [1, K * max_ratio]. Degenerate series
// report K. Requires K >= 8.
double ess(std::span<const double> series, double max_ratio = 1.0, double* op_count = nullptr);

// Empirical sd / sqrt(ess); zero for degenerate series.
double mcse(std::span<const double> series, double max_ratio = 1.0, double* op_count = nullptr);

// Single-chain split-Rhat over two halves (odd length drops the last value).
// Exactly constant series report 1.0. Requires K >= 4.
double split_rhat(std::span<const double> series);

Eigen::VectorXd ess_per_dim(const IterateHistory& history, long window, ExecPolicy policy,
                            double max_ratio = 1.0, double* op_count = nullptr);
Eigen::VectorXd mcse_per_dim(const IterateHistory& history, long window, ExecPolicy policy,
                             double max_ratio = 1.0, double* op_count = nullptr);
double rhat_max(const IterateHistory& history, long window, ExecPolicy policy);

struct WindowSearchResult {
  bool checkable = false;
  long w_opt = 0;
  double rhat_max = std::numeric_limits<double>::infinity();
  bool converged(double threshold = 1.1) const { return checkable && rhat_max <= threshold; }
};

// Evaluates max-over-dimensions split-Rhat at 5 equally spaced windows in
// [w_min, floor(0.95 k)], endpoints included, and returns the minimizer.
// Not checkable until floor(0.95 k) >= w_min.
WindowSearchResult rhat_max_window_search(const IterateHistory& history, long w_min,
                                          ExecPolicy policy = ExecPolicy::Parallel);

// Stationarity invariant 2 <d_k, x_k> - gamma |d_k|^2, one value per step.
std::vector<double> sasa_invariant_series(const IterateHistory& iterates,
                                          const IterateHistory& directions, double gamma);

// z-test of mean zero on the ESS-maximizing window (grid of 5 in
// [n_min, 0.95 k]); true when the test fails to reject at size alpha and the
// window reaches an effective sample size of n_min.
bool sasa_plus_converged(std::span<const double> invariant, double alpha = 0.05,
                         long n_min = 100);
bool sasa_plus_converged(const IterateHistory& iterates, const IterateHistory& directions,
                         double gamma, double alpha = 0.05, long n_min = 100);

// Log-log slope of |x_k - x_0|^2 between the two most recent checkpoints
// ceil(q^{n-1}), ceil(q^n); empty until two checkpoints exist.
std::optional<double> distance_slope(const IterateHistory& history, double ratio);
bool distance_based_converged(const IterateHistory& history, double ratio = 2.0,
                              double threshold = 0.5);

// Inverse standard-normal CDF (Acklam's rational approximation).
double normal_quantile(double p);

}  // namespace bbvi
