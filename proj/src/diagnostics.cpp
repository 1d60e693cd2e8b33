#include "bbvi/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "bbvi/errors.hpp"

namespace bbvi {

IterateHistory::IterateHistory(int dim, long epoch_start_step)
    : dim_(dim), epoch_start_step_(epoch_start_step), cols_(dim) {
  if (dim < 1) throw ArgumentError("history dimension must be positive");
}

void IterateHistory::append(const Eigen::VectorXd& lambda) {
  if (lambda.size() != dim_) throw ArgumentError("iterate length mismatch");
  for (int i = 0; i < dim_; ++i) cols_[i].push_back(lambda[i]);
  ++size_;
}

std::span<const double> IterateHistory::tail(int coordinate, long window) const {
  if (coordinate < 0 || coordinate >= dim_) throw ArgumentError("coordinate out of range");
  if (window < 1 || window > size_) throw ArgumentError("window exceeds history length");
  return {cols_[coordinate].data() + (size_ - window), static_cast<size_t>(window)};
}

Eigen::VectorXd IterateHistory::tail_mean(long window) const {
  if (window < 1 || window > size_) throw ArgumentError("window exceeds history length");
  Eigen::VectorXd mean(dim_);
  for (int i = 0; i < dim_; ++i) {
    double sum = 0.0;
    const auto s = tail(i, window);
    for (double v : s) sum += v;
    mean[i] = sum / static_cast<double>(window);
  }
  return mean;
}

Eigen::VectorXd IterateHistory::row(long index) const {
  if (index < 0 || index >= size_) throw ArgumentError("row index out of range");
  Eigen::VectorXd r(dim_);
  for (int i = 0; i < dim_; ++i) r[i] = cols_[i][index];
  return r;
}

bool degenerate(std::span<const double> series) {
  if (series.empty()) return true;
  const double first = series[0];
  for (double v : series)
    if (v != first) return false;
  return true;
}

namespace {

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // sample variance, n-1 denominator
};

MeanVar mean_var(std::span<const double> s) {
  const auto n = static_cast<double>(s.size());
  double sum = 0.0;
  for (double v : s) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  return {mean, s.size() > 1 ? ss / (n - 1.0) : 0.0};
}

// Integrated autocorrelation time 1 + 2 sum rho_k. Lags are evaluated lazily
// up to K/2; the Geyer rule stops at the first non-positive (even, odd) pair
// sum, so later lags never influence the estimate.
double integrated_autocorr_time(std::span<const double> x, double* op_count) {
  const long k = static_cast<long>(x.size());
  const auto kd = static_cast<double>(k);
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / kd;
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  c0 /= kd;
  if (op_count) *op_count += 2.0 * kd;
  if (c0 <= 0.0) return 1.0;

  const long max_lag = k / 2;
  auto rho = [&](long lag) {
    if (lag == 0) return 1.0;
    if (lag > max_lag) return 0.0;
    double c = 0.0;
    for (long t = 0; t + lag < k; ++t) c += (x[t] - mean) * (x[t + lag] - mean);
    if (op_count) *op_count += static_cast<double>(k - lag);
    return c / (kd * c0);
  };

  double pair_total = 0.0;
  for (long t = 0;; ++t) {
    const long even = 2 * t, odd = 2 * t + 1;
    if (even > max_lag) break;
    const double pair = rho(even) + rho(odd);
    if (pair <= 0.0) break;
    pair_total += pair;
  }
  return std::max(2.0 * pair_total - 1.0, 1e-12);
}

}  // namespace

double ess(std::span<const double> series, double max_ratio, double* op_count) {
  const long k = static_cast<long>(series.size());
  if (k < 8) throw ArgumentError("ess requires at least 8 values");
  if (degenerate(series)) return static_cast<double>(k);
  const double tau = integrated_autocorr_time(series, op_count);
  return std::clamp(static_cast<double>(k) / tau, 1.0, static_cast<double>(k) * max_ratio);
}

double mcse(std::span<const double> series, double max_ratio, double* op_count) {
  const long k = static_cast<long>(series.size());
  if (k < 8) throw ArgumentError("mcse requires at least 8 values");
  if (degenerate(series)) return 0.0;
  const double sd = std::sqrt(mean_var(series).var);
  return sd / std::sqrt(ess(series, max_ratio, op_count));
}

double split_rhat(std::span<const double> series) {
  const long k = static_cast<long>(series.size());
  if (k < 4) throw ArgumentError("split_rhat requires at least 4 values");
  if (degenerate(series)) return 1.0;
  const long n = k / 2;  // drop the last value when odd
  const auto h1 = series.subspan(0, n);
  const auto h2 = series.subspan(n, n);
  const auto s1 = mean_var(h1);
  const auto s2 = mean_var(h2);
  const double w = 0.5 * (s1.var + s2.var);
  const double mbar = 0.5 * (s1.mean + s2.mean);
  const double b = static_cast<double>(n) * ((s1.mean - mbar) * (s1.mean - mbar) +
                                             (s2.mean - mbar) * (s2.mean - mbar));
  if (w <= 0.0)
    return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double nd = static_cast<double>(n);
  const double v_plus = (nd - 1.0) / nd * w + b / nd;
  return std::sqrt(v_plus / w);
}

Eigen::VectorXd ess_per_dim(const IterateHistory& history, long window, ExecPolicy policy,
                            double max_ratio, double* op_count) {
  const int m = history.dim();
  Eigen::VectorXd out(m);
  Eigen::VectorXd ops = Eigen::VectorXd::Zero(m);
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < m; ++i)
      out[i] = ess(history.tail(i, window), max_ratio, op_count ? &ops[i] : nullptr);
  } else {
    for (int i = 0; i < m; ++i)
      out[i] = ess(history.tail(i, window), max_ratio, op_count ? &ops[i] : nullptr);
  }
  if (op_count) *op_count += ops.sum();
  return out;
}

Eigen::VectorXd mcse_per_dim(const IterateHistory& history, long window, ExecPolicy policy,
                             double max_ratio, double* op_count) {
  const int m = history.dim();
  Eigen::VectorXd out(m);
  Eigen::VectorXd ops = Eigen::VectorXd::Zero(m);
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < m; ++i)
      out[i] = mcse(history.tail(i, window), max_ratio, op_count ? &ops[i] : nullptr);
  } else {
    for (int i = 0; i < m; ++i)
      out[i] = mcse(history.tail(i, window), max_ratio, op_count ? &ops[i] : nullptr);
  }
  if (op_count) *op_count += ops.sum();
  return out;
}

double rhat_max(const IterateHistory& history, long window, ExecPolicy policy) {
  const int m = history.dim();
  double worst = -std::numeric_limits<double>::infinity();
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static) reduction(max : worst)
    for (int i = 0; i < m; ++i) worst = std::max(worst, split_rhat(history.tail(i, window)));
  } else {
    for (int i = 0; i < m; ++i) worst = std::max(worst, split_rhat(history.tail(i, window)));
  }
  return worst;
}

WindowSearchResult rhat_max_window_search(const IterateHistory& history, long w_min,
                                          ExecPolicy policy) {
  if (w_min < 4) throw ArgumentError("w_min must be at least 4");
  const long k = history.size();
  const long w_max = static_cast<long>(std::floor(0.95 * static_cast<double>(k)));
  WindowSearchResult result;
  if (w_max < w_min) return result;  // not yet checkable
  result.checkable = true;
  long previous = -1;
  for (int j = 0; j < 5; ++j) {
    const long w = w_min + static_cast<long>(std::llround((w_max - w_min) * (j / 4.0)));
    if (w == previous) continue;
    previous = w;
    const double r = rhat_max(history, w, policy);
    if (r < result.rhat_max) {
      result.rhat_max = r;
      result.w_opt = w;
    }
  }
  return result;
}

std::vector<double> sasa_invariant_series(const IterateHistory& iterates,
                                          const IterateHistory& directions, double gamma) {
  if (iterates.size() != directions.size() || iterates.dim() != directions.dim())
    throw ArgumentError("iterate and direction histories must align");
  std::vector<double> inv(static_cast<size_t>(iterates.size()));
  for (long t = 0; t < iterates.size(); ++t) {
    const Eigen::VectorXd x = iterates.row(t);
    const Eigen::VectorXd d = directions.row(t);
    inv[static_cast<size_t>(t)] = 2.0 * d.dot(x) - gamma * d.squaredNorm();
  }
  return inv;
}

bool sasa_plus_converged(std::span<const double> invariant, double alpha, long n_min) {
  const long k = static_cast<long>(invariant.size());
  const long w_max = static_cast<long>(std::floor(0.95 * static_cast<double>(k)));
  if (w_max < n_min || n_min < 8) return false;

  double best_ess = -1.0;
  long best_w = 0;
  long previous = -1;
  for (int j = 0; j < 5; ++j) {
    const long w = n_min + static_cast<long>(std::llround((w_max - n_min) * (j / 4.0)));
    if (w == previous) continue;
    previous = w;
    const double e = ess(invariant.subspan(invariant.size() - w, w));
    if (e > best_ess) {
      best_ess = e;
      best_w = w;
    }
  }
  if (best_ess < static_cast<double>(n_min)) return false;

  const auto window = invariant.subspan(invariant.size() - best_w, best_w);
  const auto stats = mean_var(window);
  if (stats.var <= 0.0) return true;  // constant invariant, trivially stationary
  const double se = std::sqrt(stats.var / best_ess);
  const double z = std::abs(stats.mean) / se;
  return z <= normal_quantile(1.0 - alpha / 2.0);
}

bool sasa_plus_converged(const IterateHistory& iterates, const IterateHistory& directions,
                         double gamma, double alpha, long n_min) {
  const auto inv = sasa_invariant_series(iterates, directions, gamma);
  return sasa_plus_converged(inv, alpha, n_min);
}

namespace {

// Squared distance from the first recorded iterate, floored so an exact
// return to the start does not produce log(0).
double squared_displacement(const IterateHistory& h, long index) {
  const Eigen::VectorXd d = h.row(index) - h.row(0);
  return std::max(d.squaredNorm(), 1e-16);
}

}  // namespace

std::optional<double> distance_slope(const IterateHistory& history, double ratio) {
  if (ratio <= 1.0) throw ArgumentError("checkpoint ratio must exceed 1");
  // Row 0 is the reference iterate, so row index equals iteration number.
  const long last = history.size() - 1;
  // Latest checkpoint pair ceil(q^{n-1}), ceil(q^n) within the history.
  long hi = -1, lo = -1;
  for (int n = 1;; ++n) {
    const long a = static_cast<long>(std::ceil(std::pow(ratio, n - 1)));
    const long b = static_cast<long>(std::ceil(std::pow(ratio, n)));
    if (b > last) break;
    if (b > a) {
      lo = a;
      hi = b;
    }
  }
  if (hi < 0) return std::nullopt;
  const double num = std::log(squared_displacement(history, hi)) -
                     std::log(squared_displacement(history, lo));
  const double den = std::log(static_cast<double>(hi)) - std::log(static_cast<double>(lo));
  return num / den;
}

bool distance_based_converged(const IterateHistory& history, double ratio, double threshold) {
  if (threshold <= 0.0 || threshold > 2.0) throw ArgumentError("threshold must be in (0, 2]");
  const auto slope = distance_slope(history, ratio);
  return slope.has_value() && *slope < threshold;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("quantile probability must be in (0, 1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace bbvi
