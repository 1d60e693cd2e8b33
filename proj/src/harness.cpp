#include "bbvi/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <vector>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "bbvi/diagnostics.hpp"
#include "bbvi/errors.hpp"
#include "bbvi/faso.hpp"
#include "bbvi/gradient.hpp"
#include "bbvi/termination.hpp"

namespace bbvi {

namespace {

using nlohmann::json;

struct GroundTruth {
  Eigen::VectorXd optimum_flat;  // optimal in-family parameters
  Eigen::VectorXd sigma_true;    // sqrt diag V
};

GroundTruth ground_truth(const RunConfig& config, const FamilyLayout& layout) {
  GroundTruth truth;
  const Eigen::MatrixXd v = covariance_matrix(config.target);
  truth.sigma_true = v.diagonal().array().sqrt();
  if (layout.kind == FamilyKind::MeanField) {
    truth.optimum_flat = optimal_mf_approximation(config.target).to_flat();
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(v);
    FullRankGaussian q{Eigen::VectorXd::Zero(config.target.dim), llt.matrixL()};
    truth.optimum_flat = q.to_flat();
  }
  return truth;
}

struct Accuracy {
  double sqrt_skl;
  double rel_mean_error;
  double rel_sd_error;
};

Accuracy accuracy_against(const GroundTruth& truth, const FamilyLayout& layout,
                          const Eigen::VectorXd& lambda) {
  Accuracy acc{};
  acc.sqrt_skl = std::sqrt(std::max(skl_flat(layout, lambda, truth.optimum_flat), 0.0));
  const int d = layout.dim;
  Eigen::VectorXd mu_hat, sigma_hat;
  if (layout.kind == FamilyKind::MeanField) {
    const auto q = MeanFieldGaussian::from_flat(lambda);
    mu_hat = q.tau;
    sigma_hat = q.psi.array().exp();
  } else {
    const auto q = FullRankGaussian::from_flat(lambda, d);
    mu_hat = q.mu;
    sigma_hat = (q.scale_tril * q.scale_tril.transpose()).diagonal().array().sqrt();
  }
  acc.rel_mean_error = (mu_hat.array() / truth.sigma_true.array()).matrix().norm();
  acc.rel_sd_error = (sigma_hat.array() / truth.sigma_true.array() - 1.0).matrix().norm();
  return acc;
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    write(json{{"schema", 1}});
  }
  void write(const json& record) {
    out_ << record.dump() << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace

ExperimentSummary run_experiment(const RunConfig& config) {
  const FamilyLayout layout{config.family, config.target.dim};
  const TargetModel target = make_gaussian_target(config.target);
  const GroundTruth truth = ground_truth(config, layout);

  ExperimentSummary summary;
  summary.jsonl_path = config.out + ".jsonl";
  summary.csv_path = config.out + ".csv";
  JsonlWriter trace(summary.jsonl_path);

  const CheckSink check_sink = [&](const CheckRecord& rec) {
    trace.write(json{{"type", "check"},
                     {"step", rec.step},
                     {"phase", rec.phase},
                     {"rhat_max", rec.rhat_max},
                     {"w_opt", rec.w_opt},
                     {"mean_mcse", rec.mean_mcse},
                     {"ess_min", rec.ess_min}});
  };

  RngStream rng(config.seed);
  const auto start = std::chrono::steady_clock::now();

  if (config.algorithm == Algorithm::Raabbvi) {
    RaabbviOptions options;
    options.family = layout;
    options.optimizer = config.optimizer;
    options.gamma0 = config.gamma0;
    options.rho = config.rho;
    options.xi = config.xi;
    options.tau = config.tau;
    options.epsilon0 = config.epsilon();
    options.epsilon_decay = config.epsilon_decay;
    options.w_min = config.w_min;
    options.k0 = config.k0;
    options.k_max = config.k_max;
    options.mc_samples = config.mc_samples;
    options.warm_start_rmsprop = config.warm_start_rmsprop;

    const EpochSink epoch_sink = [&](const EpochTraceRecord& rec) {
      trace.write(json{{"type", "epoch"},
                       {"t", rec.t},
                       {"step", rec.step},
                       {"gamma", rec.gamma},
                       {"k_t", rec.k_t},
                       {"delta_t", rec.delta},
                       {"log_c_mean", rec.log_c_mean},
                       {"kappa_mean", rec.kappa_mean},
                       {"rskl_hat", rec.rskl_hat},
                       {"ri_hat", rec.ri_hat},
                       {"inefficiency_hat", rec.inefficiency_hat},
                       {"terminated", rec.terminated}});
    };

    const RaabbviResult result = run_raabbvi(options, target, rng, check_sink, epoch_sink);
    summary.final_params = result.final_params;
    summary.terminal_step = result.total_iterations;
    summary.reason = result.terminated_reason;
    if (result.terminated_reason != "inefficiency") {
      summary.exit_code = 1;
      std::cerr << "Warning: failed to converge. Estimated error is "
                << (std::isfinite(result.estimated_error)
                        ? std::to_string(result.estimated_error)
                        : std::string("unknown"))
                << " (" << result.terminated_reason << ")\n";
    }
  } else if (config.algorithm == Algorithm::Faso) {
    FasoConfig faso_config;
    faso_config.gamma = config.fixed_gamma;
    faso_config.w_min = config.w_min;
    faso_config.epsilon = config.epsilon();
    faso_config.k_max = config.k_max;
    faso_config.optimizer = config.optimizer;
    faso_config.family = layout;

    const FasoResult result =
        run_faso(faso_config, Eigen::VectorXd::Zero(layout.param_count()), target,
                 config.mc_samples, rng, check_sink);
    summary.final_params = result.iterate_average;
    summary.terminal_step = result.iterations_used;
    summary.reason = result.success ? "mcse_gate" : "max_iterations";
    if (!result.success) {
      summary.exit_code = 1;
      std::cerr << "Warning: failed to converge within the iteration budget.\n";
    }
  } else {
    // Fixed learning rate, no stopping rule: record trailing-window iterate
    // averages every 200 steps using a window of 20% of iterations so far.
    const auto source = make_elbo_gradient_source(target, layout, config.mc_samples);
    Optimizer optimizer(config.optimizer, layout);
    IterateHistory history(layout.param_count());
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(layout.param_count());
    Eigen::VectorXd last_average = lambda;
    for (long k = 1; k <= config.k_max; ++k) {
      const GradientEstimate estimate = source(lambda, rng);
      lambda = apply_step(lambda, optimizer.direction(estimate.grad, lambda), config.fixed_gamma);
      history.append(lambda);
      if (k % 200 == 0) {
        const long window = std::max<long>(1, k / 5);
        last_average = history.tail_mean(window);
        const Accuracy acc = accuracy_against(truth, layout, last_average);
        trace.write(json{{"type", "baseline"},
                         {"step", k},
                         {"sqrt_skl", acc.sqrt_skl},
                         {"rel_mean_error", acc.rel_mean_error},
                         {"rel_sd_error", acc.rel_sd_error}});
      }
    }
    summary.final_params = last_average;
    summary.terminal_step = config.k_max;
    summary.reason = "budget";
  }

  const auto end = std::chrono::steady_clock::now();
  summary.wall_time_s = std::chrono::duration<double>(end - start).count();

  // Final variational parameters as a flat array: (tau, psi) for mean-field,
  // (mu, strictly-lower L row-major, log diag L) for full-rank.
  trace.write(json{{"type", "final"},
                   {"step", summary.terminal_step},
                   {"params", std::vector<double>(summary.final_params.data(),
                                                  summary.final_params.data() +
                                                      summary.final_params.size())}});

  const Accuracy acc = accuracy_against(truth, layout, summary.final_params);
  summary.sqrt_skl_to_opt = acc.sqrt_skl;
  summary.rel_mean_error = acc.rel_mean_error;
  summary.rel_sd_error = acc.rel_sd_error;

  std::ofstream csv(summary.csv_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot open " + summary.csv_path + " for writing");
  csv << "terminal_step,sqrt_skl_to_opt,rel_mean_error,rel_sd_error,wall_time_s\n";
  char row[256];
  std::snprintf(row, sizeof(row), "%ld,%.12g,%.12g,%.12g,%.3f\n", summary.terminal_step,
                summary.sqrt_skl_to_opt, summary.rel_mean_error, summary.rel_sd_error,
                summary.wall_time_s);
  csv << row;
  return summary;
}

}  // namespace bbvi
