#pragma once

// Reparameterization estimate of the negative-ELBO gradient.

#include <functional>

#include <Eigen/Core>

#include "bbvi/parallel.hpp"
#include "bbvi/rng.hpp"
#include "bbvi/targets.hpp"
#include "bbvi/variational.hpp"

namespace bbvi {

struct GradientEstimate {
  Eigen::VectorXd grad;                // d(-ELBO)/d lambda
  double per_sample_logp_mean = 0.0;   // mean target log density over the draws
};

// Pathwise estimator averaged over num_samples draws. Noise is drawn up front
// and per-sample terms are reduced in index order, so output is bit-identical
// for either policy and any thread count. The entropy gradient is analytic.
GradientEstimate estimate_negative_elbo_grad(const FamilyLayout& family,
                                             const Eigen::VectorXd& lambda,
                                             const TargetModel& target, int num_samples,
                                             RngStream& rng,
                                             ExecPolicy policy = ExecPolicy::Parallel);

using GradientSource = std::function<GradientEstimate(const Eigen::VectorXd&, RngStream&)>;

GradientSource make_elbo_gradient_source(const TargetModel& target, FamilyLayout family,
                                         int num_samples,
                                         ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace bbvi
