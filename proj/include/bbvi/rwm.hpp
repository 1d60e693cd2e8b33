#pragma once

// Adaptive random-walk Metropolis for low-dimensional posteriors.

#include <functional>

#include <Eigen/Core>

#include "bbvi/parallel.hpp"
#include "bbvi/rng.hpp"

namespace bbvi {

struct RwmOptions {
  int chains = 4;
  int draws_per_chain = 5000;  // first half is warmup and is discarded
  double target_accept = 0.25;
};

struct RwmRun {
  Eigen::MatrixXd draws;        // kept draws, chains stacked in order
  Eigen::VectorXd rhat;         // per-coordinate split-Rhat across chains
  Eigen::VectorXd accept_rate;  // per chain, kept phase
};

// Proposal scales adapt toward the target acceptance rate during warmup and
// freeze afterwards. Each chain owns a forked rng stream, so results do not
// depend on the execution policy.
RwmRun adaptive_rwm(const std::function<double(const Eigen::VectorXd&)>& log_post,
                    const Eigen::MatrixXd& inits, RngStream& rng, RwmOptions options = {},
                    ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace bbvi
