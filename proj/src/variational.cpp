#include "bbvi/variational.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "bbvi/errors.hpp"

namespace bbvi {

namespace {

constexpr double kHalfLog2PiPlusHalf = 1.4189385332046727;  // (1 + log 2*pi) / 2

void require_same_dim(int a, int b) {
  if (a != b) throw ArgumentError("dimension mismatch between parameter vectors");
}

}  // namespace

Eigen::VectorXd MeanFieldGaussian::to_flat() const {
  Eigen::VectorXd lambda(2 * dim());
  lambda << tau, psi;
  return lambda;
}

MeanFieldGaussian MeanFieldGaussian::from_flat(const Eigen::VectorXd& lambda) {
  if (lambda.size() % 2 != 0 || lambda.size() == 0)
    throw ArgumentError("mean-field parameter vector must have even positive length");
  const int d = static_cast<int>(lambda.size()) / 2;
  return {lambda.head(d), lambda.tail(d)};
}

Eigen::VectorXd FullRankGaussian::to_flat() const {
  const int d = dim();
  Eigen::VectorXd lambda(d + d * (d + 1) / 2);
  lambda.head(d) = mu;
  int at = d;
  for (int i = 1; i < d; ++i)
    for (int j = 0; j < i; ++j) lambda[at++] = scale_tril(i, j);
  for (int i = 0; i < d; ++i) lambda[at++] = std::log(scale_tril(i, i));
  return lambda;
}

FullRankGaussian FullRankGaussian::from_flat(const Eigen::VectorXd& lambda, int d) {
  if (lambda.size() != d + d * (d + 1) / 2)
    throw ArgumentError("full-rank parameter vector has wrong length");
  FullRankGaussian q;
  q.mu = lambda.head(d);
  q.scale_tril = Eigen::MatrixXd::Zero(d, d);
  int at = d;
  for (int i = 1; i < d; ++i)
    for (int j = 0; j < i; ++j) q.scale_tril(i, j) = lambda[at++];
  for (int i = 0; i < d; ++i) q.scale_tril(i, i) = std::exp(lambda[at++]);
  return q;
}

Eigen::VectorXd sample(const MeanFieldGaussian& q, const Eigen::VectorXd& noise) {
  require_same_dim(q.dim(), static_cast<int>(noise.size()));
  return q.tau.array() + q.psi.array().exp() * noise.array();
}

Eigen::VectorXd sample(const FullRankGaussian& q, const Eigen::VectorXd& noise) {
  require_same_dim(q.dim(), static_cast<int>(noise.size()));
  return q.mu + q.scale_tril * noise;
}

double entropy(const MeanFieldGaussian& q) {
  return q.psi.sum() + q.dim() * kHalfLog2PiPlusHalf;
}

double entropy(const FullRankGaussian& q) {
  return q.scale_tril.diagonal().array().log().sum() + q.dim() * kHalfLog2PiPlusHalf;
}

double kl(const MeanFieldGaussian& p, const MeanFieldGaussian& q) {
  require_same_dim(p.dim(), q.dim());
  double total = 0.0;
  for (int i = 0; i < p.dim(); ++i) {
    const double dpsi = q.psi[i] - p.psi[i];
    const double dt = p.tau[i] - q.tau[i];
    total += dpsi + 0.5 * (std::exp(2.0 * p.psi[i]) + dt * dt) * std::exp(-2.0 * q.psi[i]) - 0.5;
  }
  return total;
}

double kl(const FullRankGaussian& p, const FullRankGaussian& q) {
  require_same_dim(p.dim(), q.dim());
  const int d = p.dim();
  const auto lq = q.scale_tril.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd a = lq.solve(p.scale_tril);  // L_q^{-1} L_p
  const Eigen::VectorXd b = lq.solve(q.mu - p.mu);
  const double logdet = q.scale_tril.diagonal().array().log().sum() -
                        p.scale_tril.diagonal().array().log().sum();
  return 0.5 * (a.squaredNorm() + b.squaredNorm() - d) + logdet;
}

double skl(const MeanFieldGaussian& p, const MeanFieldGaussian& q) {
  require_same_dim(p.dim(), q.dim());
  double total = 0.0;
  for (int i = 0; i < p.dim(); ++i) {
    const double e = 2.0 * (p.psi[i] - q.psi[i]);
    const double dt = p.tau[i] - q.tau[i];
    total += 0.5 * (std::exp(e) + std::exp(-e) +
                    dt * dt * (std::exp(-2.0 * p.psi[i]) + std::exp(-2.0 * q.psi[i])) - 2.0);
  }
  return total;
}

double skl(const FullRankGaussian& p, const FullRankGaussian& q) {
  return kl(p, q) + kl(q, p);
}

Eigen::VectorXd sample_flat(const FamilyLayout& layout, const Eigen::VectorXd& lambda,
                            const Eigen::VectorXd& noise) {
  if (lambda.size() != layout.param_count())
    throw ArgumentError("parameter vector does not match family layout");
  if (layout.kind == FamilyKind::MeanField)
    return sample(MeanFieldGaussian::from_flat(lambda), noise);
  return sample(FullRankGaussian::from_flat(lambda, layout.dim), noise);
}

double entropy_flat(const FamilyLayout& layout, const Eigen::VectorXd& lambda) {
  if (layout.kind == FamilyKind::MeanField)
    return entropy(MeanFieldGaussian::from_flat(lambda));
  return entropy(FullRankGaussian::from_flat(lambda, layout.dim));
}

double kl_flat(const FamilyLayout& layout, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (layout.kind == FamilyKind::MeanField)
    return kl(MeanFieldGaussian::from_flat(a), MeanFieldGaussian::from_flat(b));
  return kl(FullRankGaussian::from_flat(a, layout.dim), FullRankGaussian::from_flat(b, layout.dim));
}

double skl_flat(const FamilyLayout& layout, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (layout.kind == FamilyKind::MeanField)
    return skl(MeanFieldGaussian::from_flat(a), MeanFieldGaussian::from_flat(b));
  return skl(FullRankGaussian::from_flat(a, layout.dim),
             FullRankGaussian::from_flat(b, layout.dim));
}

}  // namespace bbvi
