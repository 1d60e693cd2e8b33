#pragma once

// Target distributions: unnormalized log density plus gradient, with the
// Gaussian benchmark covariance structures and a logistic-regression example.

#include <functional>

#include <Eigen/Core>

#include "bbvi/variational.hpp"

namespace bbvi {

struct TargetModel {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&)> log_density_u;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_log_density_u;
  // Rough flop count of one gradient evaluation; feeds the deterministic
  // optimization-vs-check cost ratio.
  double grad_cost_hint = 0.0;
};

enum class GaussianStructure { Identity, DiagNonIdentity, UniformCorr, BandedCorr };

struct GaussianTargetSpec {
  int dim = 100;
  GaussianStructure structure = GaussianStructure::Identity;
  double corr = 0.8;

  bool operator==(const GaussianTargetSpec&) const = default;
};

Eigen::MatrixXd covariance_matrix(const GaussianTargetSpec& spec);

// N(0, V) with V per the spec's structure; log density drops the constant.
TargetModel make_gaussian_target(const GaussianTargetSpec& spec);

// Bernoulli likelihood with logit link and an isotropic Gaussian prior.
TargetModel make_logistic_regression_target(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                            double prior_scale);

// argmin over the mean-field family of KL(q || N(0, V)). Diagonal structures
// are in-family; the correlated ones are solved by deterministic descent on
// the closed-form divergence to ~1e-10.
MeanFieldGaussian optimal_mf_approximation(const GaussianTargetSpec& spec);

// KL(q || N(0, V)) in closed form.
double mf_kl_to_gaussian(const MeanFieldGaussian& q, const Eigen::MatrixXd& v);

}  // namespace bbvi
