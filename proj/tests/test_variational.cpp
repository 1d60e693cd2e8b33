#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bbvi/errors.hpp"
#include "bbvi/rng.hpp"
#include "bbvi/variational.hpp"
#include "test_support.hpp"

using namespace bbvi;

namespace {

MeanFieldGaussian mf1(double tau, double psi) {
  MeanFieldGaussian q;
  q.tau = Eigen::VectorXd::Constant(1, tau);
  q.psi = Eigen::VectorXd::Constant(1, psi);
  return q;
}

MeanFieldGaussian random_mf(int d, RngStream& rng, double tau_range = 3.0,
                            double psi_range = 1.5) {
  MeanFieldGaussian q;
  q.tau.resize(d);
  q.psi.resize(d);
  for (int i = 0; i < d; ++i) {
    q.tau[i] = tau_range * (2.0 * rng.uniform() - 1.0);
    q.psi[i] = psi_range * (2.0 * rng.uniform() - 1.0);
  }
  return q;
}

FullRankGaussian random_fr(int d, RngStream& rng) {
  FullRankGaussian q;
  q.mu.resize(d);
  for (int i = 0; i < d; ++i) q.mu[i] = 2.0 * rng.normal();
  q.scale_tril = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) q.scale_tril(i, j) = 0.5 * rng.normal();
    q.scale_tril(i, i) = std::exp(0.5 * (2.0 * rng.uniform() - 1.0));
  }
  return q;
}

}  // namespace

TEST_CASE("sample applies the deterministic transform") {
  Eigen::VectorXd z1 = Eigen::VectorXd::Constant(1, 1.5);
  CHECK(sample(mf1(0.0, 0.0), z1)[0] == doctest::Approx(1.5));

  Eigen::VectorXd one = Eigen::VectorXd::Constant(1, 1.0);
  CHECK(sample(mf1(2.0, std::log(3.0)), one)[0] == doctest::Approx(5.0));

  FullRankGaussian q{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)};
  Eigen::VectorXd z(3);
  z << 0.3, -1.2, 2.0;
  CHECK((sample(q, z) - z).norm() == doctest::Approx(0.0));

  CHECK_THROWS_AS(sample(mf1(0, 0), Eigen::VectorXd::Zero(2)), ArgumentError);
}

TEST_CASE("skl closed form matches the hand values") {
  CHECK(skl(mf1(0, 0), mf1(0, 0)) == doctest::Approx(0.0));
  CHECK(skl(mf1(0, 0), mf1(1, 0)) == doctest::Approx(1.0));
  CHECK(skl(mf1(0, 0), mf1(0, std::log(2.0))) == doctest::Approx(1.125));
}

TEST_CASE("kl matches the quadrature oracle on the hand examples") {
  CHECK(kl(mf1(0, 0), mf1(0, 0)) == doctest::Approx(0.0));
  CHECK(kl(mf1(1, 0), mf1(0, 0)) == doctest::Approx(0.5).epsilon(1e-9));
  // N(0, 4) vs N(0, 1)
  CHECK(kl(mf1(0, std::log(2.0)), mf1(0, 0)) ==
        doctest::Approx((4.0 - 1.0 - std::log(4.0)) / 2.0).epsilon(1e-9));
  CHECK(kl(mf1(1, 0), mf1(0, 0)) ==
        doctest::Approx(testsup::kl_1d_quadrature(1, 0, 0, 0)).epsilon(1e-8));
}

TEST_CASE("quadrature oracle agrees with the closed form across random pairs") {
  RngStream rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    const auto a = random_mf(1, rng);
    const auto b = random_mf(1, rng);
    const double closed = skl(a, b);
    const double quad = testsup::skl_1d_quadrature(a.tau[0], a.psi[0], b.tau[0], b.psi[0]);
    CHECK(std::abs(closed - quad) < 1e-6);
  }
}

TEST_CASE("entropy") {
  const double h0 = 0.5 * (1.0 + std::log(2.0 * M_PI));
  CHECK(entropy(mf1(3.0, 0.0)) == doctest::Approx(h0));
  MeanFieldGaussian q2;
  q2.tau = Eigen::VectorXd::Zero(2);
  q2.psi = Eigen::VectorXd::Zero(2);
  CHECK(entropy(q2) == doctest::Approx(2.0 * h0));
  CHECK(entropy(mf1(0.0, std::log(2.0))) == doctest::Approx(std::log(2.0) + h0));

  FullRankGaussian fr{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  fr.scale_tril(1, 1) = 2.0;
  CHECK(entropy(fr) == doctest::Approx(std::log(2.0) + 2.0 * h0));
}

TEST_CASE("skl equals the sum of both directed divergences") {
  RngStream rng(22);
  for (int rep = 0; rep < 50; ++rep) {
    const auto a = random_mf(4, rng);
    const auto b = random_mf(4, rng);
    const double lhs = skl(a, b);
    const double rhs = kl(a, b) + kl(b, a);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(lhs >= 0.0);
    CHECK(skl(b, a) == doctest::Approx(lhs).epsilon(1e-12));
  }
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = random_fr(3, rng);
    const auto b = random_fr(3, rng);
    const double lhs = skl(a, b);
    CHECK(lhs == doctest::Approx(kl(a, b) + kl(b, a)).epsilon(1e-12));
    CHECK(lhs >= 0.0);
  }
}

TEST_CASE("mean-field skl is permutation invariant and factorizes over dims") {
  RngStream rng(33);
  const int d = 6;
  const auto a = random_mf(d, rng);
  const auto b = random_mf(d, rng);
  const double whole = skl(a, b);

  double per_dim_sum = 0.0;
  for (int i = 0; i < d; ++i) per_dim_sum += skl(mf1(a.tau[i], a.psi[i]), mf1(b.tau[i], b.psi[i]));
  CHECK(whole == doctest::Approx(per_dim_sum).epsilon(1e-12));

  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  MeanFieldGaussian ap = a, bp = b;
  for (int i = 0; i < d; ++i) {
    ap.tau[i] = a.tau[perm[i]];
    ap.psi[i] = a.psi[perm[i]];
    bp.tau[i] = b.tau[perm[i]];
    bp.psi[i] = b.psi[perm[i]];
  }
  CHECK(skl(ap, bp) == doctest::Approx(whole).epsilon(1e-12));
}

TEST_CASE("full-rank with diagonal scale matches the mean-field divergence") {
  RngStream rng(44);
  const int d = 3;
  const auto a = random_mf(d, rng);
  const auto b = random_mf(d, rng);
  FullRankGaussian fa{a.tau, Eigen::MatrixXd(a.psi.array().exp().matrix().asDiagonal())};
  FullRankGaussian fb{b.tau, Eigen::MatrixXd(b.psi.array().exp().matrix().asDiagonal())};
  CHECK(skl(fa, fb) == doctest::Approx(skl(a, b)).epsilon(1e-10));
}

TEST_CASE("flat round trip preserves parameters") {
  RngStream rng(55);
  const auto a = random_mf(5, rng);
  const auto back = MeanFieldGaussian::from_flat(a.to_flat());
  CHECK((back.tau - a.tau).norm() == 0.0);
  CHECK((back.psi - a.psi).norm() == 0.0);

  const auto f = random_fr(4, rng);
  const auto fback = FullRankGaussian::from_flat(f.to_flat(), 4);
  CHECK((fback.mu - f.mu).norm() == 0.0);
  CHECK((fback.scale_tril - f.scale_tril).norm() < 1e-14);

  const FamilyLayout layout{FamilyKind::FullRank, 4};
  CHECK(skl_flat(layout, f.to_flat(), f.to_flat()) == doctest::Approx(0.0));
  CHECK_THROWS_AS(skl(a, random_mf(3, rng)), ArgumentError);
}

TEST_CASE("sample pushforward matches the parameters within 5 standard errors") {
  RngStream rng(66);
  const int d = 3;
  const long n = 1000000;

  auto mf = random_mf(d, rng, 1.0, 0.5);
  Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sq_acc = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd z(d);
  for (long s = 0; s < n; ++s) {
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    const Eigen::VectorXd theta = sample(mf, z);
    mean_acc += theta;
    sq_acc += theta.cwiseProduct(theta);
  }
  for (int i = 0; i < d; ++i) {
    const double sigma = std::exp(mf.psi[i]);
    const double mean = mean_acc[i] / n;
    const double var = sq_acc[i] / n - mean * mean;
    CHECK(std::abs(mean - mf.tau[i]) < 5.0 * sigma / std::sqrt(static_cast<double>(n)));
    const double var_se = sigma * sigma * std::sqrt(2.0 / static_cast<double>(n));
    CHECK(std::abs(var - sigma * sigma) < 5.0 * var_se);
  }

  auto fr = random_fr(d, rng);
  const Eigen::MatrixXd cov = fr.scale_tril * fr.scale_tril.transpose();
  Eigen::VectorXd fr_mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd fr_cov = Eigen::MatrixXd::Zero(d, d);
  for (long s = 0; s < n; ++s) {
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    const Eigen::VectorXd theta = sample(fr, z) - fr.mu;
    fr_mean += theta;
    fr_cov += theta * theta.transpose();
  }
  fr_mean /= static_cast<double>(n);
  fr_cov /= static_cast<double>(n);
  for (int i = 0; i < d; ++i) {
    CHECK(std::abs(fr_mean[i]) < 5.0 * std::sqrt(cov(i, i) / static_cast<double>(n)));
    for (int j = 0; j <= i; ++j) {
      const double se =
          std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / static_cast<double>(n));
      CHECK(std::abs(fr_cov(i, j) - fr_mean[i] * fr_mean[j] - cov(i, j)) < 5.0 * se);
    }
  }
}
