#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// The OpenMP kernels must reproduce the serial reference bit for bit: work is
// partitioned over independent output slots and reductions run in a fixed
// order, so thread count cannot change any result.

#include "bbvi/diagnostics.hpp"
#include "bbvi/faso.hpp"
#include "bbvi/gradient.hpp"
#include "bbvi/rwm.hpp"
#include "test_support.hpp"

using namespace bbvi;

namespace {

IterateHistory ar1_history(int dims, long n, double phi, RngStream& rng) {
  IterateHistory h(dims);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dims);
  const double innovation = std::sqrt(1.0 - phi * phi);
  for (long t = 0; t < n; ++t) {
    for (int i = 0; i < dims; ++i) x[i] = phi * x[i] + innovation * rng.normal();
    h.append(x);
  }
  return h;
}

}  // namespace

TEST_CASE("per-dimension diagnostics match bitwise") {
  RngStream rng(1);
  const auto h = ar1_history(24, 4000, 0.8, rng);

  const auto ess_s = ess_per_dim(h, 3000, ExecPolicy::Serial);
  const auto ess_p = ess_per_dim(h, 3000, ExecPolicy::Parallel);
  CHECK((ess_s - ess_p).norm() == 0.0);

  const auto mcse_s = mcse_per_dim(h, 3000, ExecPolicy::Serial);
  const auto mcse_p = mcse_per_dim(h, 3000, ExecPolicy::Parallel);
  CHECK((mcse_s - mcse_p).norm() == 0.0);

  CHECK(rhat_max(h, 3000, ExecPolicy::Serial) == rhat_max(h, 3000, ExecPolicy::Parallel));

  const auto search_s = rhat_max_window_search(h, 200, ExecPolicy::Serial);
  const auto search_p = rhat_max_window_search(h, 200, ExecPolicy::Parallel);
  CHECK(search_s.w_opt == search_p.w_opt);
  CHECK(search_s.rhat_max == search_p.rhat_max);
}

TEST_CASE("diagnostic op counts match across policies") {
  RngStream rng(2);
  const auto h = ar1_history(8, 2000, 0.9, rng);
  double ops_s = 0.0, ops_p = 0.0;
  ess_per_dim(h, 1500, ExecPolicy::Serial, 1.0, &ops_s);
  ess_per_dim(h, 1500, ExecPolicy::Parallel, 1.0, &ops_p);
  CHECK(ops_s == ops_p);
  CHECK(ops_s > 0.0);
}

TEST_CASE("gradient estimates match bitwise") {
  const int d = 12;
  const FamilyLayout layout{FamilyKind::MeanField, d};
  const TargetModel target = make_gaussian_target({d, GaussianStructure::BandedCorr, 0.8});
  Eigen::VectorXd lambda = Eigen::VectorXd::Constant(2 * d, 0.2);

  for (int m : {1, 7, 64}) {
    RngStream a(100 + m), b(100 + m);
    const auto es = estimate_negative_elbo_grad(layout, lambda, target, m, a, ExecPolicy::Serial);
    const auto ep =
        estimate_negative_elbo_grad(layout, lambda, target, m, b, ExecPolicy::Parallel);
    CHECK((es.grad - ep.grad).norm() == 0.0);
    CHECK(es.per_sample_logp_mean == ep.per_sample_logp_mean);
  }
}

TEST_CASE("sampler chains merge identically under both policies") {
  auto log_post = [](const Eigen::VectorXd& theta) { return -0.5 * theta.squaredNorm(); };
  Eigen::MatrixXd inits(4, 2);
  inits.setZero();
  RwmOptions options;
  options.draws_per_chain = 600;

  RngStream a(5), b(5);
  const auto rs = adaptive_rwm(log_post, inits, a, options, ExecPolicy::Serial);
  const auto rp = adaptive_rwm(log_post, inits, b, options, ExecPolicy::Parallel);
  CHECK((rs.draws - rp.draws).norm() == 0.0);
  CHECK((rs.rhat - rp.rhat).norm() == 0.0);
}

TEST_CASE("whole faso runs match bitwise across policies") {
  const int d = 4;
  const TargetModel target = make_gaussian_target({d, GaussianStructure::DiagNonIdentity});
  FasoConfig config;
  config.gamma = 0.1;
  config.w_min = 100;
  config.epsilon = 0.2;
  config.k_max = 20000;
  config.family = {FamilyKind::MeanField, d};

  config.policy = ExecPolicy::Serial;
  RngStream a(9);
  const auto rs = run_faso(config, Eigen::VectorXd::Zero(2 * d), target, 10, a);
  config.policy = ExecPolicy::Parallel;
  RngStream b(9);
  const auto rp = run_faso(config, Eigen::VectorXd::Zero(2 * d), target, 10, b);

  REQUIRE(rs.success == rp.success);
  CHECK(rs.iterations_used == rp.iterations_used);
  CHECK(rs.final_window == rp.final_window);
  CHECK((rs.iterate_average - rp.iterate_average).norm() == 0.0);
  CHECK(rs.measured_cost_ratio == rp.measured_cost_ratio);
}
