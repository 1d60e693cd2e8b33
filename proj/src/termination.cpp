#include "bbvi/termination.hpp"

#include <algorithm>
#include <cmath>

#include "bbvi/errors.hpp"
#include "bbvi/rwm.hpp"

namespace bbvi {

namespace {

constexpr double kSigmaFloor = 1e-4;  // keeps noiseless data from degenerating the fit

struct SklPoint {
  double log_delta;
  double log_gamma;
  double weight;
};

std::vector<SklPoint> usable_points(const std::vector<EpochRecord>& records) {
  int total_epochs = 0;
  for (const auto& r : records) total_epochs = std::max(total_epochs, r.t);
  const Eigen::VectorXd w = regression_weights(std::max(total_epochs, 1));
  std::vector<SklPoint> points;
  for (const auto& r : records) {
    if (r.t < 1 || !std::isfinite(r.delta) || r.delta <= 0.0) continue;
    points.push_back({std::log(r.delta), std::log(r.gamma), w[r.t - 1]});
  }
  return points;
}

double log_cauchy(double x, double scale) {
  return -std::log(M_PI * scale * (1.0 + (x / scale) * (x / scale)));
}

double log_half_cauchy(double x, double scale) {
  return std::log(2.0) + log_cauchy(x, scale);
}

struct WlsAtKappa {
  double log_c = 0.0;
  double sigma = kSigmaFloor;
  double weighted_sse = 0.0;
  double weight_sum = 0.0;
};

WlsAtKappa wls_at_kappa(const std::vector<SklPoint>& points, double rho, double kappa) {
  const double shift = 2.0 * std::log(std::pow(rho, -kappa) - 1.0);
  WlsAtKappa fit;
  double sum = 0.0;
  for (const auto& p : points) {
    sum += p.weight * (p.log_delta - shift - 2.0 * kappa * p.log_gamma);
    fit.weight_sum += p.weight;
  }
  fit.log_c = sum / fit.weight_sum;
  for (const auto& p : points) {
    const double resid = p.log_delta - fit.log_c - shift - 2.0 * kappa * p.log_gamma;
    fit.weighted_sse += p.weight * resid * resid;
  }
  fit.sigma = std::max(std::sqrt(fit.weighted_sse / fit.weight_sum), kSigmaFloor);
  return fit;
}

SklRegressionFit fallback_wls(const std::vector<SklPoint>& points, double rho, bool fixed_kappa,
                              RngStream& rng) {
  double kappa = 1.0;
  if (!fixed_kappa) {
    double best_sse = std::numeric_limits<double>::infinity();
    for (int g = 1; g <= 50; ++g) {
      const double cand = g / 50.0;
      const double sse = wls_at_kappa(points, rho, cand).weighted_sse;
      if (sse < best_sse) {
        best_sse = sse;
        kappa = cand;
      }
    }
  }
  const WlsAtKappa wls = wls_at_kappa(points, rho, kappa);
  const double se = wls.sigma / std::sqrt(wls.weight_sum);

  SklRegressionFit fit;
  fit.fixed_kappa = fixed_kappa;
  fit.used_fallback = true;
  fit.log_c_mean = wls.log_c;
  fit.kappa_mean = kappa;
  fit.sigma_mean = wls.sigma;
  // Gaussian pseudo-draws around the point estimate so interval queries work
  // on both fit paths.
  RngStream draw_rng = rng.fork(0x5e11b4cdULL);
  const int n = 1000;
  fit.posterior_draws.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    fit.posterior_draws(i, 0) = wls.log_c + se * draw_rng.normal();
    fit.posterior_draws(i, 1) = kappa;
    fit.posterior_draws(i, 2) = wls.sigma;
  }
  return fit;
}

}  // namespace

double SklRegressionFit::log_c_sd() const {
  const auto n = static_cast<double>(posterior_draws.rows());
  const double mean = posterior_draws.col(0).mean();
  return std::sqrt((posterior_draws.col(0).array() - mean).square().sum() / (n - 1.0));
}

std::pair<double, double> SklRegressionFit::log_c_interval(double mass) const {
  std::vector<double> v(posterior_draws.col(0).data(),
                        posterior_draws.col(0).data() + posterior_draws.rows());
  std::sort(v.begin(), v.end());
  const double lo_q = (1.0 - mass) / 2.0;
  const auto at = [&](double q) {
    const auto idx = static_cast<size_t>(q * (v.size() - 1));
    return v[idx];
  };
  return {at(lo_q), at(1.0 - lo_q)};
}

Eigen::VectorXd regression_weights(int total_epochs) {
  if (total_epochs < 1) throw ArgumentError("need at least one epoch");
  Eigen::VectorXd w(total_epochs);
  for (int t = 1; t <= total_epochs; ++t) {
    const double gap = static_cast<double>(total_epochs - t);
    w[t - 1] = std::pow(1.0 + gap * gap / 9.0, -0.25);
  }
  return w;
}

SklRegressionFit fit_skl_regression(const std::vector<EpochRecord>& records, double rho,
                                    bool fixed_kappa, RngStream& rng, ExecPolicy policy) {
  if (!(rho > 0.0 && rho < 1.0)) throw ArgumentError("rho must lie in (0, 1)");
  const auto points = usable_points(records);
  if (points.empty()) throw FitError("no SKL signal: every delta is zero or missing");

  const int p = fixed_kappa ? 2 : 3;  // (log C, [logit kappa], log sigma)

  auto log_post = [&](const Eigen::VectorXd& theta) {
    const double log_c = theta[0];
    const double s = theta[p - 1];
    if (s < std::log(kSigmaFloor) || s > 50.0) return -std::numeric_limits<double>::infinity();
    double kappa = 1.0;
    double lp = log_cauchy(log_c, 10.0) + log_half_cauchy(std::exp(s), 10.0) + s;
    if (!fixed_kappa) {
      const double u = theta[1];
      if (std::abs(u) > 40.0) return -std::numeric_limits<double>::infinity();
      kappa = 1.0 / (1.0 + std::exp(-u));
      lp += std::log(kappa) + std::log(1.0 - kappa);  // uniform prior, logit jacobian
    }
    const double sigma2 = std::exp(2.0 * s);
    const double shift = 2.0 * std::log(std::pow(rho, -kappa) - 1.0);
    for (const auto& pt : points) {
      const double resid = pt.log_delta - log_c - shift - 2.0 * kappa * pt.log_gamma;
      lp += pt.weight * (-0.5 * std::log(2.0 * M_PI * sigma2) - resid * resid / (2.0 * sigma2));
    }
    return lp;
  };

  // Initialize chains around the weighted least-squares solution.
  RngStream init_rng = rng.fork(0x1417ULL);
  RwmOptions options;
  Eigen::MatrixXd inits(options.chains, p);
  for (int c = 0; c < options.chains; ++c) {
    const double kappa0 =
        fixed_kappa ? 1.0 : std::clamp(0.5 + 0.25 * init_rng.normal(), 0.05, 0.95);
    const WlsAtKappa wls = wls_at_kappa(points, rho, kappa0);
    inits(c, 0) = wls.log_c + 0.5 * init_rng.normal();
    if (!fixed_kappa) inits(c, 1) = std::log(kappa0 / (1.0 - kappa0));
    inits(c, p - 1) = std::log(std::max(wls.sigma, 0.05)) + 0.3 * init_rng.normal();
  }

  RngStream mcmc_rng = rng.fork(0x6327ULL);
  const RwmRun run = adaptive_rwm(log_post, inits, mcmc_rng, options, policy);
  if (!run.draws.allFinite()) throw FitError("sampler produced non-finite draws");

  if ((run.rhat.array() > 1.05).any()) return fallback_wls(points, rho, fixed_kappa, rng);

  SklRegressionFit fit;
  fit.fixed_kappa = fixed_kappa;
  const long n = run.draws.rows();
  fit.posterior_draws.resize(n, 3);
  fit.posterior_draws.col(0) = run.draws.col(0);
  if (fixed_kappa)
    fit.posterior_draws.col(1).setOnes();
  else
    fit.posterior_draws.col(1) = (1.0 / (1.0 + (-run.draws.col(1).array()).exp())).matrix();
  fit.posterior_draws.col(2) = run.draws.col(p - 1).array().exp().matrix();
  fit.log_c_mean = fit.posterior_draws.col(0).mean();
  fit.kappa_mean = fixed_kappa ? 1.0 : fit.posterior_draws.col(1).mean();
  fit.sigma_mean = fit.posterior_draws.col(2).mean();
  return fit;
}

double estimate_rskl(const SklRegressionFit& fit, double gamma_t, double rho, double xi) {
  if (!(gamma_t > 0.0)) throw ArgumentError("gamma must be positive");
  if (xi < 0.0) throw ArgumentError("xi must be nonnegative");
  const double kappa = fit.kappa_mean;
  const double sqrt_c = std::exp(0.5 * std::clamp(fit.log_c_mean, -700.0, 700.0));
  return std::pow(rho, kappa) + xi / (sqrt_c * std::pow(gamma_t, kappa));
}

IterationFit fit_iteration_regression(const std::vector<EpochRecord>& records) {
  int total_epochs = 0;
  for (const auto& r : records) total_epochs = std::max(total_epochs, r.t);
  const Eigen::VectorXd w = regression_weights(std::max(total_epochs, 1));
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  long used = 0;
  for (const auto& r : records) {
    if (r.t < 1 || r.iterations < 1) continue;
    const double weight = w[r.t - 1];
    const double x = std::log(r.gamma);
    const double y = std::log(static_cast<double>(r.iterations));
    sw += weight;
    sx += weight * x;
    sy += weight * y;
    sxx += weight * x * x;
    sxy += weight * x * y;
    ++used;
  }
  if (used < 2) throw FitError("iteration regression needs at least two epochs");
  const double denom = sw * sxx - sx * sx;
  if (std::abs(denom) < 1e-12 * sw * sxx + 1e-300)
    throw FitError("iteration regression design is singular");
  IterationFit fit;
  fit.alpha = (sw * sxy - sx * sy) / denom;
  fit.beta = (sy - fit.alpha * sx) / sw;
  return fit;
}

double predict_next_iterations(const IterationFit& fit, double gamma_next, double k_curr) {
  if (!std::isfinite(fit.alpha) || !std::isfinite(fit.beta))
    throw ArgumentError("non-finite regression coefficients");
  if (fit.beta < 0.0) return std::pow(gamma_next, fit.alpha) * std::exp(fit.beta);
  return k_curr;
}

TerminationDecision decide_termination(double rskl_hat, double k_curr, double predicted_k_next,
                                       double k0, double tau) {
  if (k_curr < 0.0 || k0 < 0.0 || k_curr + k0 <= 0.0)
    throw ArgumentError("iteration counts must be nonnegative and not both zero");
  TerminationDecision decision;
  decision.rskl_hat = rskl_hat;
  decision.predicted_k_next = predicted_k_next;
  decision.ri_hat = predicted_k_next / (k_curr + k0);
  decision.inefficiency_hat = rskl_hat * decision.ri_hat;
  decision.terminate = decision.inefficiency_hat > tau;
  return decision;
}

bool kappa_is_fixed(OptimizerKind optimizer, FamilyKind family) {
  const bool sgd_like = optimizer == OptimizerKind::AvgAdam ||
                        optimizer == OptimizerKind::AvgRmsProp ||
                        optimizer == OptimizerKind::Sgd;
  return sgd_like && family == FamilyKind::MeanField;
}

RaabbviResult run_raabbvi(const RaabbviOptions& options, const TargetModel& target,
                          RngStream& rng, const CheckSink& check_sink,
                          const EpochSink& epoch_sink) {
  if (options.family.dim != target.dim) throw ArgumentError("family and target dimension differ");
  if (!(options.rho > 0.0 && options.rho < 1.0)) throw ArgumentError("rho must lie in (0, 1)");

  const bool fixed_kappa = kappa_is_fixed(options.optimizer, options.family.kind);

  RaabbviResult result;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(options.family.param_count());
  double gamma = options.gamma0;
  double epsilon = options.epsilon0;
  long k_total = 0;
  int t = 0;

  while (k_total < options.k_max) {
    FasoConfig faso_config;
    faso_config.gamma = gamma;
    faso_config.w_min = options.w_min;
    faso_config.epsilon = epsilon;
    faso_config.k_max = options.k_max - k_total;
    faso_config.optimizer =
        (t == 0 && options.warm_start_rmsprop) ? OptimizerKind::RmsProp : options.optimizer;
    faso_config.hyper = options.hyper;
    faso_config.family = options.family;
    faso_config.policy = options.policy;
    faso_config.global_step_offset = k_total;

    const Eigen::VectorXd previous = lambda;
    const FasoResult faso =
        run_faso(faso_config, lambda, target, options.mc_samples, rng, check_sink);
    lambda = faso.iterate_average;
    k_total += faso.iterations_used;

    if (!faso.success) {
      result.terminated_reason =
          faso.error_step ? "faso_failure: " + faso.error_message : "max_iterations";
      break;
    }

    EpochRecord record;
    record.t = t;
    record.gamma = gamma;
    record.iterations = faso.iterations_used;
    record.average = lambda;
    if (t >= 1) record.delta = skl_flat(options.family, previous, lambda);
    result.epochs.push_back(record);

    EpochTraceRecord trace;
    trace.t = t;
    trace.step = k_total;
    trace.gamma = gamma;
    trace.k_t = faso.iterations_used;
    trace.delta = record.delta;

    bool stop = false;
    if (t >= 1) {
      try {
        RngStream fit_rng = rng.fork(0xf1700000ULL + static_cast<std::uint64_t>(t));
        const SklRegressionFit fit =
            fit_skl_regression(result.epochs, options.rho, fixed_kappa, fit_rng, options.policy);
        const double rskl = estimate_rskl(fit, gamma, options.rho, options.xi);
        result.estimated_error =
            std::exp(0.5 * fit.log_c_mean) * std::pow(gamma, fit.kappa_mean);
        trace.log_c_mean = fit.log_c_mean;
        trace.kappa_mean = fit.kappa_mean;
        trace.rskl_hat = rskl;
        if (t >= 2) {
          const IterationFit iteration_fit = fit_iteration_regression(result.epochs);
          const double predicted = predict_next_iterations(
              iteration_fit, options.rho * gamma, static_cast<double>(faso.iterations_used));
          const TerminationDecision decision =
              decide_termination(rskl, static_cast<double>(faso.iterations_used), predicted,
                                 static_cast<double>(options.k0), options.tau);
          result.decisions.push_back(decision);
          trace.ri_hat = decision.ri_hat;
          trace.inefficiency_hat = decision.inefficiency_hat;
          if (decision.terminate) {
            stop = true;
            result.terminated_reason = "inefficiency";
          }
        }
      } catch (const FitError& e) {
        stop = true;
        result.terminated_reason = std::string("fit_error: ") + e.what();
      }
    }
    trace.terminated = stop;
    if (epoch_sink) epoch_sink(trace);
    if (stop) break;

    gamma *= options.rho;
    epsilon *= options.epsilon_decay;
    ++t;
  }

  if (result.terminated_reason.empty()) result.terminated_reason = "max_iterations";
  result.final_params = lambda;
  result.total_iterations = k_total;
  return result;
}

}  // namespace bbvi
