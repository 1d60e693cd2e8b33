#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "bbvi/errors.hpp"
#include "bbvi/gradient.hpp"

using namespace bbvi;

namespace {

// Closed-form gradient of the negative ELBO for a standard-normal target and
// mean-field parameters: d/dtau = tau, d/dpsi = e^{2psi} - 1.
Eigen::VectorXd closed_form_grad(const Eigen::VectorXd& lambda) {
  const int d = static_cast<int>(lambda.size()) / 2;
  Eigen::VectorXd g(2 * d);
  g.head(d) = lambda.head(d);
  g.tail(d) = (2.0 * lambda.tail(d).array()).exp() - 1.0;
  return g;
}

}  // namespace

TEST_CASE("estimator is unbiased against the closed form") {
  const int d = 2;
  const FamilyLayout layout{FamilyKind::MeanField, d};
  const TargetModel target = make_gaussian_target({d, GaussianStructure::Identity});

  Eigen::VectorXd lambda(2 * d);
  SUBCASE("at the optimum the mean gradient is zero") { lambda.setZero(); }
  SUBCASE("away from the optimum it matches tau and e^{2psi}-1") {
    lambda << 0.5, 0.0, 0.1, -0.2;
  }

  RngStream rng(42);
  const int reps = 100000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2 * d);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(2 * d);
  for (int r = 0; r < reps; ++r) {
    const auto est = estimate_negative_elbo_grad(layout, lambda, target, 1, rng);
    mean += est.grad;
    sq += est.grad.cwiseProduct(est.grad);
  }
  mean /= reps;
  const Eigen::VectorXd expected = closed_form_grad(lambda);
  for (int i = 0; i < 2 * d; ++i) {
    const double var = sq[i] / reps - mean[i] * mean[i];
    const double se = std::sqrt(var / reps);
    CHECK(std::abs(mean[i] - expected[i]) < 5.0 * se);
  }
}

TEST_CASE("variance shrinks like 1/M") {
  const int d = 1;
  const FamilyLayout layout{FamilyKind::MeanField, d};
  const TargetModel target = make_gaussian_target({d, GaussianStructure::Identity});
  Eigen::VectorXd lambda(2);
  lambda << 0.3, 0.1;

  RngStream rng(7);
  auto variance_at = [&](int m) {
    const int reps = 20000;
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto est = estimate_negative_elbo_grad(layout, lambda, target, m, rng);
      sum += est.grad[1];
      sum_sq += est.grad[1] * est.grad[1];
    }
    const double mean = sum / reps;
    return sum_sq / reps - mean * mean;
  };
  const double ratio = variance_at(16) / variance_at(1);
  CHECK(ratio > 1.0 / 24.0);
  CHECK(ratio < 1.0 / 10.0);
}

TEST_CASE("fixed seed gives bit-identical estimates") {
  const FamilyLayout layout{FamilyKind::MeanField, 3};
  const TargetModel target = make_gaussian_target({3, GaussianStructure::BandedCorr, 0.8});
  Eigen::VectorXd lambda = Eigen::VectorXd::Constant(6, 0.25);

  RngStream a(123), b(123);
  const auto ea = estimate_negative_elbo_grad(layout, lambda, target, 7, a);
  const auto eb = estimate_negative_elbo_grad(layout, lambda, target, 7, b);
  CHECK((ea.grad - eb.grad).norm() == 0.0);
  CHECK(ea.per_sample_logp_mean == eb.per_sample_logp_mean);
}

TEST_CASE("full-rank gradient matches finite differences of the expected objective") {
  // For a Gaussian target the negative ELBO is available in closed form:
  // E_q[-log pi_u] - H(q) with q = N(mu, L L^T), pi_u = N(0, V):
  // 0.5 (tr(V^{-1} L L^T) + mu^T V^{-1} mu) - sum log L_ii - const.
  const int d = 3;
  const FamilyLayout layout{FamilyKind::FullRank, d};
  const GaussianTargetSpec spec{d, GaussianStructure::UniformCorr, 0.5};
  const TargetModel target = make_gaussian_target(spec);
  const Eigen::MatrixXd prec = covariance_matrix(spec).inverse();

  auto objective = [&](const Eigen::VectorXd& lambda) {
    const auto q = FullRankGaussian::from_flat(lambda, d);
    const Eigen::MatrixXd cov = q.scale_tril * q.scale_tril.transpose();
    return 0.5 * ((prec * cov).trace() + q.mu.dot(prec * q.mu)) -
           q.scale_tril.diagonal().array().log().sum();
  };

  FullRankGaussian q;
  q.mu = Eigen::VectorXd::Constant(d, 0.4);
  q.scale_tril = Eigen::MatrixXd::Identity(d, d);
  q.scale_tril(1, 0) = 0.3;
  q.scale_tril(2, 1) = -0.2;
  q.scale_tril(2, 2) = 1.5;
  const Eigen::VectorXd lambda = q.to_flat();

  RngStream rng(99);
  const int reps = 200000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(lambda.size());
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(lambda.size());
  for (int r = 0; r < reps; ++r) {
    const auto est = estimate_negative_elbo_grad(layout, lambda, target, 1, rng);
    mean += est.grad;
    sq += est.grad.cwiseProduct(est.grad);
  }
  mean /= reps;

  const double h = 1e-5;
  for (int i = 0; i < lambda.size(); ++i) {
    Eigen::VectorXd up = lambda, down = lambda;
    up[i] += h;
    down[i] -= h;
    const double expected = (objective(up) - objective(down)) / (2.0 * h);
    const double var = sq[i] / reps - mean[i] * mean[i];
    const double se = std::sqrt(var / reps);
    CHECK(std::abs(mean[i] - expected) < 5.0 * se + 1e-7);
  }
}

TEST_CASE("non-finite targets raise an estimator error carrying the point") {
  const FamilyLayout layout{FamilyKind::MeanField, 1};
  TargetModel bad;
  bad.dim = 1;
  bad.log_density_u = [](const Eigen::VectorXd& theta) {
    return theta[0] > 0.0 ? std::numeric_limits<double>::quiet_NaN() : -theta.squaredNorm();
  };
  bad.grad_log_density_u = [](const Eigen::VectorXd& theta) { return (-theta).eval(); };

  Eigen::VectorXd lambda(2);
  lambda << 10.0, 0.0;  // essentially every draw lands in the NaN region
  RngStream rng(5);
  try {
    estimate_negative_elbo_grad(layout, lambda, bad, 4, rng);
    FAIL("expected an EstimatorError");
  } catch (const EstimatorError& e) {
    CHECK(e.theta.size() == 1);
    CHECK(e.theta[0] > 0.0);
  }
}

TEST_CASE("argument validation") {
  const FamilyLayout layout{FamilyKind::MeanField, 2};
  const TargetModel target = make_gaussian_target({2, GaussianStructure::Identity});
  RngStream rng(1);
  CHECK_THROWS_AS(
      estimate_negative_elbo_grad(layout, Eigen::VectorXd::Zero(4), target, 0, rng),
      ArgumentError);
  CHECK_THROWS_AS(
      estimate_negative_elbo_grad(layout, Eigen::VectorXd::Zero(3), target, 1, rng),
      ArgumentError);
}
