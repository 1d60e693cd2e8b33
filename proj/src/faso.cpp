#include "bbvi/faso.hpp"

#include <algorithm>
#include <cmath>

#include "bbvi/errors.hpp"

namespace bbvi {

double chi_of_r(double r) {
  if (r < 0.0) throw ArgumentError("cost ratio must be nonnegative");
  return 1.0 + 1.0 / std::sqrt(1.0 + r);
}

double schedule_cost_factor(double r) {
  if (r < 0.0) throw ArgumentError("cost ratio must be nonnegative");
  return (2.0 + r + 2.0 * std::sqrt(1.0 + r)) / (1.0 + r);
}

McseGateResult mcse_gate(const IterateHistory& history, long window, const FamilyLayout& family,
                         double epsilon, double ess_floor, ExecPolicy policy,
                         double max_ess_ratio) {
  if (window < 8) throw ArgumentError("mcse gate needs a window of at least 8");
  if (history.dim() != family.param_count())
    throw ArgumentError("history does not match family layout");

  McseGateResult gate;
  gate.ess = ess_per_dim(history, window, policy, max_ess_ratio, &gate.op_count);
  gate.ess_min = gate.ess.minCoeff();
  // mcse = sd / sqrt(ess), sharing the ess pass above.
  gate.mcse.resize(history.dim());
  for (int i = 0; i < history.dim(); ++i) {
    const auto series = history.tail(i, window);
    if (degenerate(series)) {
      gate.mcse[i] = 0.0;
      continue;
    }
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(window);
    double ss = 0.0;
    for (double v : series) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(window - 1));
    gate.mcse[i] = sd / std::sqrt(gate.ess[i]);
  }

  bool mcse_ok;
  if (family.kind == FamilyKind::MeanField) {
    const int d = family.dim;
    const Eigen::VectorXd window_mean = history.tail_mean(window);
    const Eigen::VectorXd sigma_hat = window_mean.tail(d).array().exp();
    gate.mcse.head(d).array() /= sigma_hat.array();
    const double tau_mean = gate.mcse.head(d).mean();
    const double psi_mean = gate.mcse.tail(d).mean();
    mcse_ok = tau_mean < epsilon && psi_mean < epsilon;
    gate.mean_relative_mcse = gate.mcse.mean();
  } else {
    gate.mean_relative_mcse = gate.mcse.mean();
    mcse_ok = gate.mean_relative_mcse < epsilon;
  }
  gate.pass = mcse_ok && gate.ess_min >= ess_floor;
  return gate;
}

FasoResult run_faso(const FasoConfig& config, const Eigen::VectorXd& lambda0,
                    const GradientSource& source, RngStream& rng, const CheckSink& sink) {
  if (config.k_max < 1) throw ArgumentError("k_max must be positive");
  if (config.w_min < 8) throw ArgumentError("w_min must be at least 8");
  if (!(config.gamma > 0.0)) throw ArgumentError("gamma must be positive");
  if (!(config.epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  if (lambda0.size() != config.family.param_count())
    throw ArgumentError("initial parameters do not match family layout");

  const long check_every =
      config.check_interval > 0 ? config.check_interval : std::max<long>(1, config.w_min / 2);

  Optimizer optimizer(config.optimizer, config.family, config.hyper);
  IterateHistory history(config.family.param_count(), config.global_step_offset);
  Eigen::VectorXd lambda = lambda0;

  FasoResult result;
  RecheckSchedule schedule;
  long k_conv = -1;
  bool first_gate = true;
  long k = 0;

  while (k < config.k_max) {
    ++k;
    try {
      const GradientEstimate estimate = source(lambda, rng);
      const Eigen::VectorXd direction = optimizer.direction(estimate.grad, lambda);
      lambda = apply_step(lambda, direction, config.gamma);
    } catch (const EstimatorError& e) {
      result.error_step = k;
      result.error_message = e.what();
      --k;
      break;
    } catch (const OptimizerError& e) {
      result.error_step = k;
      result.error_message = e.what();
      --k;
      break;
    }
    history.append(lambda);

    if (k_conv < 0 && k % check_every == 0) {
      const auto search = rhat_max_window_search(history, config.w_min, config.policy);
      if (search.checkable) {
        if (sink) {
          CheckRecord rec;
          rec.step = config.global_step_offset + k;
          rec.phase = "rhat";
          rec.rhat_max = search.rhat_max;
          rec.w_opt = search.w_opt;
          sink(rec);
        }
        if (search.rhat_max <= config.rhat_threshold) {
          k_conv = k - search.w_opt;
          result.k_conv = k_conv;
          schedule.next_window = search.w_opt;
        }
      }
    }

    if (k_conv >= 0 && k - k_conv == schedule.next_window) {
      const long window = schedule.next_window;
      auto gate = mcse_gate(history, window, config.family, config.epsilon, config.ess_floor,
                            config.policy, config.max_ess_ratio);
      if (first_gate) {
        // Cost ratio from deterministic operation counts, so the recheck
        // schedule is reproducible run to run.
        const double check_per_iterate = gate.op_count / static_cast<double>(window);
        if (config.op_cost_per_iteration > 0.0 && check_per_iterate > 0.0)
          schedule.cost_ratio =
              std::clamp(config.op_cost_per_iteration / check_per_iterate, 0.0, 1e3);
        schedule.growth = chi_of_r(schedule.cost_ratio);
        result.measured_cost_ratio = schedule.cost_ratio;
        first_gate = false;
      }
      if (sink) {
        CheckRecord rec;
        rec.step = config.global_step_offset + k;
        rec.phase = "mcse";
        rec.w_opt = window;
        rec.mean_mcse = gate.mean_relative_mcse;
        rec.ess_min = gate.ess_min;
        sink(rec);
      }
      DiagnosticsReport report;
      report.step = config.global_step_offset + k;
      report.window = window;
      report.ess = gate.ess;
      report.mcse = gate.mcse;
      result.diagnostics_trace.push_back(std::move(report));

      if (gate.pass) {
        result.success = true;
        result.final_window = window;
        result.iterations_used = k;
        result.iterate_average = history.tail_mean(window);
        return result;
      }
      schedule.grow();
    }
  }

  // Budget exhausted (or aborted): best-effort average over the trailing
  // window, clamped to what the history can support.
  result.success = false;
  result.iterations_used = k;
  if (history.size() > 0) {
    long window = static_cast<long>(std::floor(0.95 * static_cast<double>(history.size())));
    window = std::max<long>(window, 1);
    if (k_conv >= 0) {
      window = std::min(window, schedule.next_window);
      window = std::min(window, history.size() - k_conv);
    }
    window = std::clamp<long>(window, 1, history.size());
    result.final_window = window;
    result.iterate_average = history.tail_mean(window);
  } else {
    result.iterate_average = lambda0;
    result.final_window = 0;
  }
  return result;
}

FasoResult run_faso(const FasoConfig& config, const Eigen::VectorXd& lambda0,
                    const TargetModel& target, int num_samples, RngStream& rng,
                    const CheckSink& sink) {
  FasoConfig cfg = config;
  if (cfg.op_cost_per_iteration <= 0.0)
    cfg.op_cost_per_iteration = num_samples * target.grad_cost_hint +
                                12.0 * static_cast<double>(cfg.family.param_count());
  const auto source = make_elbo_gradient_source(target, cfg.family, num_samples, cfg.policy);
  return run_faso(cfg, lambda0, source, rng, sink);
}

}  // namespace bbvi
