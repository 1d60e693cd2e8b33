// Times the OpenMP kernels against their serial reference implementations.
//
//   ./bench_parallel [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "bbvi/diagnostics.hpp"
#include "bbvi/gradient.hpp"
#include "bbvi/parallel.hpp"
#include "bbvi/rwm.hpp"
#include "bbvi/targets.hpp"

using namespace bbvi;

namespace {

template <typename F>
double time_ms(int repeats, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) body();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-34s serial %9.2f ms   parallel %9.2f ms   speedup %.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

IterateHistory make_chain(int dims, long n, double phi, RngStream& rng) {
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

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("threads available: %d, repeats per timing: %d\n\n", max_threads(), repeats);

  RngStream rng(2024);
  const auto chain = make_chain(100, 20000, 0.95, rng);

  report("ess over 100 dims, window 19000",
         time_ms(repeats, [&] { ess_per_dim(chain, 19000, ExecPolicy::Serial); }),
         time_ms(repeats, [&] { ess_per_dim(chain, 19000, ExecPolicy::Parallel); }));

  report("rhat window search, k = 20000",
         time_ms(repeats, [&] { rhat_max_window_search(chain, 200, ExecPolicy::Serial); }),
         time_ms(repeats, [&] { rhat_max_window_search(chain, 200, ExecPolicy::Parallel); }));

  const int d = 200;
  const FamilyLayout layout{FamilyKind::MeanField, d};
  const TargetModel target = make_gaussian_target({d, GaussianStructure::BandedCorr, 0.8});
  const Eigen::VectorXd lambda = Eigen::VectorXd::Constant(2 * d, 0.1);
  RngStream grad_serial(7), grad_parallel(7);
  report("gradient, d = 200, 64 draws",
         time_ms(repeats,
                 [&] {
                   estimate_negative_elbo_grad(layout, lambda, target, 64, grad_serial,
                                               ExecPolicy::Serial);
                 }),
         time_ms(repeats, [&] {
           estimate_negative_elbo_grad(layout, lambda, target, 64, grad_parallel,
                                       ExecPolicy::Parallel);
         }));

  auto log_post = [](const Eigen::VectorXd& theta) { return -0.5 * theta.squaredNorm(); };
  const Eigen::MatrixXd inits = Eigen::MatrixXd::Zero(4, 3);
  RwmOptions options;
  RngStream rwm_serial(9), rwm_parallel(9);
  report("sampler, 4 chains x 5000 draws",
         time_ms(repeats,
                 [&] { adaptive_rwm(log_post, inits, rwm_serial, options, ExecPolicy::Serial); }),
         time_ms(repeats, [&] {
           adaptive_rwm(log_post, inits, rwm_parallel, options, ExecPolicy::Parallel);
         }));

  return 0;
}
