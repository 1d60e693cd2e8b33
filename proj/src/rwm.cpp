#include "bbvi/rwm.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "bbvi/errors.hpp"

namespace bbvi {

namespace {

// Split-Rhat over J sequences of equal length: each is halved, then the usual
// between/within variance ratio is taken over the 2J half-sequences.
double multi_chain_split_rhat(const std::vector<std::vector<double>>& seqs) {
  std::vector<std::pair<double, double>> halves;  // (mean, variance)
  for (const auto& s : seqs) {
    const long n = static_cast<long>(s.size()) / 2;
    if (n < 2) return std::numeric_limits<double>::infinity();
    for (int h = 0; h < 2; ++h) {
      double mean = 0.0;
      for (long t = 0; t < n; ++t) mean += s[h * n + t];
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (long t = 0; t < n; ++t) {
        const double d = s[h * n + t] - mean;
        var += d * d;
      }
      var /= static_cast<double>(n - 1);
      halves.emplace_back(mean, var);
    }
  }
  const auto j = static_cast<double>(halves.size());
  double w = 0.0, grand = 0.0;
  for (const auto& [m, v] : halves) {
    w += v;
    grand += m;
  }
  w /= j;
  grand /= j;
  double b = 0.0;
  for (const auto& [m, v] : halves) b += (m - grand) * (m - grand);
  const auto n_h = static_cast<double>(seqs[0].size() / 2);
  b *= n_h / (j - 1.0);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(((n_h - 1.0) / n_h * w + b / n_h) / w);
}

}  // namespace

RwmRun adaptive_rwm(const std::function<double(const Eigen::VectorXd&)>& log_post,
                    const Eigen::MatrixXd& inits, RngStream& rng, RwmOptions options,
                    ExecPolicy policy) {
  const int chains = options.chains;
  const int p = static_cast<int>(inits.cols());
  if (inits.rows() != chains) throw ArgumentError("one initial point per chain required");
  if (options.draws_per_chain < 8) throw ArgumentError("too few draws per chain");

  const int warmup = options.draws_per_chain / 2;
  const int kept = options.draws_per_chain - warmup;

  std::vector<RngStream> streams;
  streams.reserve(chains);
  for (int c = 0; c < chains; ++c) streams.push_back(rng.fork(0xa11c0000ULL + c));

  Eigen::MatrixXd draws(static_cast<long>(chains) * kept, p);
  Eigen::VectorXd accept_rate(chains);

  auto run_chain = [&](int c) {
    RngStream& stream = streams[c];
    Eigen::VectorXd theta = inits.row(c);
    double lp = log_post(theta);
    double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(p)));
    Eigen::MatrixXd proposal_chol = Eigen::MatrixXd::Identity(p, p);
    Eigen::MatrixXd warmup_draws(warmup, p);
    long accepted_kept = 0;
    for (int it = 0; it < options.draws_per_chain; ++it) {
      Eigen::VectorXd z(p);
      for (int i = 0; i < p; ++i) z[i] = stream.normal();
      const Eigen::VectorXd prop = theta + std::exp(log_scale) * (proposal_chol * z);
      const double lp_prop = log_post(prop);
      const bool accept =
          std::isfinite(lp_prop) && std::log(stream.uniform() + 1e-300) < lp_prop - lp;
      if (accept) {
        theta = prop;
        lp = lp_prop;
      }
      if (it < warmup) {
        warmup_draws.row(it) = theta;
        log_scale += ((accept ? 1.0 : 0.0) - options.target_accept) / std::sqrt(1.0 + it);
        // Re-estimate the proposal shape from the recent warmup history.
        if (it >= 400 && (it + 1) % 250 == 0) {
          const int lo = it / 2;
          const int n = it + 1 - lo;
          const Eigen::MatrixXd block = warmup_draws.middleRows(lo, n);
          const Eigen::RowVectorXd mean = block.colwise().mean();
          Eigen::MatrixXd cov = (block.rowwise() - mean).transpose() *
                                (block.rowwise() - mean) / static_cast<double>(n - 1);
          cov += 1e-10 * Eigen::MatrixXd::Identity(p, p);
          const Eigen::LLT<Eigen::MatrixXd> llt(cov);
          if (llt.info() == Eigen::Success) proposal_chol = llt.matrixL();
        }
      } else {
        accepted_kept += accept ? 1 : 0;
        draws.row(static_cast<long>(c) * kept + (it - warmup)) = theta;
      }
    }
    accept_rate[c] = static_cast<double>(accepted_kept) / kept;
  };

  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < chains; ++c) run_chain(c);
  } else {
    for (int c = 0; c < chains; ++c) run_chain(c);
  }

  RwmRun run;
  run.draws = std::move(draws);
  run.accept_rate = accept_rate;
  run.rhat.resize(p);
  for (int i = 0; i < p; ++i) {
    std::vector<std::vector<double>> seqs(chains);
    for (int c = 0; c < chains; ++c) {
      seqs[c].resize(kept);
      for (int t = 0; t < kept; ++t) seqs[c][t] = run.draws(static_cast<long>(c) * kept + t, i);
    }
    run.rhat[i] = multi_chain_split_rhat(seqs);
  }
  return run;
}

}  // namespace bbvi
