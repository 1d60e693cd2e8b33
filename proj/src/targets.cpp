#include "bbvi/targets.hpp"

#include <cmath>
#include <memory>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "bbvi/errors.hpp"

namespace bbvi {

namespace {

double log1p_exp(double a) {
  // log(1 + e^a) without overflow.
  return a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

}  // namespace

Eigen::MatrixXd covariance_matrix(const GaussianTargetSpec& spec) {
  if (spec.dim < 1) throw ArgumentError("target dimension must be positive");
  const int d = spec.dim;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(d, d);
  switch (spec.structure) {
    case GaussianStructure::Identity:
      break;
    case GaussianStructure::DiagNonIdentity:
      for (int i = 0; i < d; ++i) v(i, i) = i + 1;
      break;
    case GaussianStructure::UniformCorr:
      if (spec.corr <= 0.0 || spec.corr >= 1.0)
        throw ArgumentError("correlation must lie in (0, 1)");
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          if (i != j) v(i, j) = spec.corr;
      break;
    case GaussianStructure::BandedCorr:
      if (spec.corr <= 0.0 || spec.corr >= 1.0)
        throw ArgumentError("correlation must lie in (0, 1)");
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          if (i != j) v(i, j) = std::pow(spec.corr, std::abs(i - j));
      break;
  }
  return v;
}

TargetModel make_gaussian_target(const GaussianTargetSpec& spec) {
  const int d = spec.dim;
  TargetModel model;
  model.dim = d;

  if (spec.structure == GaussianStructure::Identity) {
    model.log_density_u = [](const Eigen::VectorXd& theta) { return -0.5 * theta.squaredNorm(); };
    model.grad_log_density_u = [](const Eigen::VectorXd& theta) { return (-theta).eval(); };
    model.grad_cost_hint = 2.0 * d;
    return model;
  }
  if (spec.structure == GaussianStructure::DiagNonIdentity) {
    Eigen::VectorXd inv_var(d);
    for (int i = 0; i < d; ++i) inv_var[i] = 1.0 / (i + 1);
    model.log_density_u = [inv_var](const Eigen::VectorXd& theta) {
      return -0.5 * (theta.array().square() * inv_var.array()).sum();
    };
    model.grad_log_density_u = [inv_var](const Eigen::VectorXd& theta) {
      return (-(theta.array() * inv_var.array())).matrix().eval();
    };
    model.grad_cost_hint = 3.0 * d;
    return model;
  }

  const Eigen::MatrixXd v = covariance_matrix(spec);
  auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(v);
  if (llt->info() != Eigen::Success) throw ArgumentError("covariance is not positive definite");
  model.log_density_u = [llt](const Eigen::VectorXd& theta) {
    return -0.5 * theta.dot(llt->solve(theta));
  };
  model.grad_log_density_u = [llt](const Eigen::VectorXd& theta) {
    return (-llt->solve(theta)).eval();
  };
  model.grad_cost_hint = 2.0 * d * d;
  return model;
}

TargetModel make_logistic_regression_target(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                            double prior_scale) {
  if (X.rows() != y.size()) throw ArgumentError("design matrix and labels disagree on n");
  if (!(prior_scale > 0.0)) throw ArgumentError("prior scale must be positive");
  if (!X.allFinite() || !y.allFinite()) throw ArgumentError("NaN in logistic regression data");
  for (int i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0) throw ArgumentError("labels must be 0 or 1");

  const int p = static_cast<int>(X.cols());
  const double inv_s2 = 1.0 / (prior_scale * prior_scale);
  TargetModel model;
  model.dim = p;
  model.log_density_u = [X, y, inv_s2](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = X * beta;
    double ll = 0.0;
    for (int i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1p_exp(eta[i]);
    return ll - 0.5 * inv_s2 * beta.squaredNorm();
  };
  model.grad_log_density_u = [X, y, inv_s2](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd resid(eta.size());
    for (int i = 0; i < eta.size(); ++i) resid[i] = y[i] - 1.0 / (1.0 + std::exp(-eta[i]));
    return (X.transpose() * resid - inv_s2 * beta).eval();
  };
  model.grad_cost_hint = 4.0 * static_cast<double>(X.rows()) * p + 2.0 * p;
  return model;
}

MeanFieldGaussian optimal_mf_approximation(const GaussianTargetSpec& spec) {
  const int d = spec.dim;
  MeanFieldGaussian q{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};

  if (spec.structure == GaussianStructure::Identity) return q;
  if (spec.structure == GaussianStructure::DiagNonIdentity) {
    for (int i = 0; i < d; ++i) q.psi[i] = 0.5 * std::log(i + 1.0);
    return q;
  }

  // Separable convex objective in psi once diag(V^{-1}) is known:
  // f_i(psi) = a_i e^{2 psi} / 2 - psi. The mean stays at zero (its gradient
  // V^{-1} tau vanishes there). Backtracking descent to ~1e-10.
  const Eigen::MatrixXd v = covariance_matrix(spec);
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  Eigen::VectorXd prec_diag(d);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(d, i);
    prec_diag[i] = llt.solve(e)[i];
  }
  for (int i = 0; i < d; ++i) {
    const double a = prec_diag[i];
    double psi = 0.0;
    auto f = [a](double x) { return 0.5 * a * std::exp(2.0 * x) - x; };
    for (int iter = 0; iter < 500; ++iter) {
      const double g = a * std::exp(2.0 * psi) - 1.0;
      if (std::abs(g) < 1e-12) break;
      double step = 0.5;
      while (f(psi - step * g) > f(psi) - 0.25 * step * g * g) step *= 0.5;
      psi -= step * g;
    }
    q.psi[i] = psi;
  }
  return q;
}

double mf_kl_to_gaussian(const MeanFieldGaussian& q, const Eigen::MatrixXd& v) {
  const int d = q.dim();
  if (v.rows() != d || v.cols() != d) throw ArgumentError("covariance shape mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  const Eigen::MatrixXd l = llt.matrixL();
  const Eigen::VectorXd sigma = q.psi.array().exp();
  // tr(V^{-1} D) = |L^{-1} D^{1/2}|_F^2 with D = diag(sigma^2).
  const Eigen::MatrixXd x =
      l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(sigma.asDiagonal()));
  const Eigen::VectorXd w = l.triangularView<Eigen::Lower>().solve(q.tau);
  const double logdet_v = 2.0 * l.diagonal().array().log().sum();
  return 0.5 * (x.squaredNorm() + w.squaredNorm() - d + logdet_v - 2.0 * q.psi.sum());
}

}  // namespace bbvi
