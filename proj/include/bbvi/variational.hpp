#pragma once

// Gaussian variational families: sampling, entropy, and closed-form KL /
// symmetrized KL between members. Every family is also addressable as a flat
// unconstrained vector in R^m so that optimizers never see the structure.

#include <Eigen/Core>

namespace bbvi {

enum class FamilyKind { MeanField, FullRank };

struct FamilyLayout {
  FamilyKind kind = FamilyKind::MeanField;
  int dim = 1;

  int param_count() const {
    return kind == FamilyKind::MeanField ? 2 * dim : dim + dim * (dim + 1) / 2;
  }
  bool operator==(const FamilyLayout&) const = default;
};

// N(tau, diag e^{2 psi}); flat layout [tau; psi].
struct MeanFieldGaussian {
  Eigen::VectorXd tau;
  Eigen::VectorXd psi;

  int dim() const { return static_cast<int>(tau.size()); }
  Eigen::VectorXd to_flat() const;
  static MeanFieldGaussian from_flat(const Eigen::VectorXd& lambda);
};

// N(mu, L L^T) with L lower triangular, positive diagonal.
// Flat layout [mu; strictly-lower L in row-major order; log diag L].
struct FullRankGaussian {
  Eigen::VectorXd mu;
  Eigen::MatrixXd scale_tril;

  int dim() const { return static_cast<int>(mu.size()); }
  Eigen::VectorXd to_flat() const;
  static FullRankGaussian from_flat(const Eigen::VectorXd& lambda, int dim);
};

Eigen::VectorXd sample(const MeanFieldGaussian& q, const Eigen::VectorXd& noise);
Eigen::VectorXd sample(const FullRankGaussian& q, const Eigen::VectorXd& noise);

double entropy(const MeanFieldGaussian& q);
double entropy(const FullRankGaussian& q);

double kl(const MeanFieldGaussian& p, const MeanFieldGaussian& q);
double kl(const FullRankGaussian& p, const FullRankGaussian& q);

// Symmetric in its arguments, zero iff p == q. The mean-field overload uses
// the per-dimension closed form; full-rank sums the two directed divergences.
double skl(const MeanFieldGaussian& p, const MeanFieldGaussian& q);
double skl(const FullRankGaussian& p, const FullRankGaussian& q);

// Flat-vector entry points used by the optimization loop.
Eigen::VectorXd sample_flat(const FamilyLayout& layout, const Eigen::VectorXd& lambda,
                            const Eigen::VectorXd& noise);
double entropy_flat(const FamilyLayout& layout, const Eigen::VectorXd& lambda);
double kl_flat(const FamilyLayout& layout, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double skl_flat(const FamilyLayout& layout, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace bbvi
