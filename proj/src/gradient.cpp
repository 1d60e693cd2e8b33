#include "bbvi/gradient.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "bbvi/errors.hpp"

namespace bbvi {

namespace {

// Pathwise chain rule for one draw, excluding the entropy term:
// fills contrib with d(-log pi_u(theta_s))/d lambda.
void path_contribution(const FamilyLayout& family, const Eigen::VectorXd& lambda,
                       const Eigen::VectorXd& z, const Eigen::VectorXd& grad_theta,
                       Eigen::VectorXd& contrib) {
  const int d = family.dim;
  if (family.kind == FamilyKind::MeanField) {
    contrib.head(d) = -grad_theta;
    contrib.tail(d) =
        -(grad_theta.array() * z.array() * lambda.tail(d).array().exp());
    return;
  }
  contrib.head(d) = -grad_theta;
  int at = d;
  for (int i = 1; i < d; ++i)
    for (int j = 0; j < i; ++j) contrib[at++] = -grad_theta[i] * z[j];
  for (int i = 0; i < d; ++i) {
    const double lii = std::exp(lambda[at]);
    contrib[at++] = -grad_theta[i] * z[i] * lii;
  }
}

}  // namespace

GradientEstimate estimate_negative_elbo_grad(const FamilyLayout& family,
                                             const Eigen::VectorXd& lambda,
                                             const TargetModel& target, int num_samples,
                                             RngStream& rng, ExecPolicy policy) {
  if (num_samples < 1) throw ArgumentError("num_samples must be at least 1");
  if (lambda.size() != family.param_count())
    throw ArgumentError("parameter vector does not match family layout");
  if (target.dim != family.dim)
    throw ArgumentError("target dimension does not match family");

  const int d = family.dim;
  const int m = family.param_count();

  Eigen::MatrixXd noise(d, num_samples);
  for (int s = 0; s < num_samples; ++s)
    for (int i = 0; i < d; ++i) noise(i, s) = rng.normal();

  Eigen::MatrixXd contribs(m, num_samples);
  Eigen::VectorXd logps(num_samples);
  std::vector<signed char> bad(num_samples, 0);

  auto eval_one = [&](int s) {
    const Eigen::VectorXd z = noise.col(s);
    const Eigen::VectorXd theta = sample_flat(family, lambda, z);
    const double logp = target.log_density_u(theta);
    const Eigen::VectorXd g = target.grad_log_density_u(theta);
    if (!std::isfinite(logp) || !g.allFinite()) {
      bad[s] = 1;
      contribs.col(s).head(d) = theta;  // stash the offending point for the error
      return;
    }
    logps[s] = logp;
    Eigen::VectorXd contrib(m);
    path_contribution(family, lambda, z, g, contrib);
    contribs.col(s) = contrib;
  };

  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
    for (int s = 0; s < num_samples; ++s) eval_one(s);
  } else {
    for (int s = 0; s < num_samples; ++s) eval_one(s);
  }

  for (int s = 0; s < num_samples; ++s) {
    if (bad[s]) {
      std::ostringstream msg;
      msg << "non-finite target value at draw " << s;
      throw EstimatorError(msg.str(), contribs.col(s).head(d));
    }
  }

  GradientEstimate est;
  est.grad = Eigen::VectorXd::Zero(m);
  double logp_sum = 0.0;
  for (int s = 0; s < num_samples; ++s) {  // fixed-order reduction
    est.grad += contribs.col(s);
    logp_sum += logps[s];
  }
  est.grad /= num_samples;
  est.per_sample_logp_mean = logp_sum / num_samples;

  // Analytic entropy gradient: -1 per log-scale coordinate (psi or log diag L).
  est.grad.tail(d).array() -= 1.0;
  return est;
}

GradientSource make_elbo_gradient_source(const TargetModel& target, FamilyLayout family,
                                         int num_samples, ExecPolicy policy) {
  return [target, family, num_samples, policy](const Eigen::VectorXd& lambda, RngStream& rng) {
    return estimate_negative_elbo_grad(family, lambda, target, num_samples, rng, policy);
  };
}

}  // namespace bbvi
