#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "mhl/experiments.hpp"
#include "mhl/generate.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace mhl;

namespace {

template <class Fn>
double time_of(Fn&& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

int threads_available() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 3;
  const int max_threads = threads_available();
  std::printf("threads available: %d\n\n", max_threads);

  // dense stopping-time scan: binary depth 4 has 458330 antichains
  InstanceSpec spec;
  spec.kind = TreeShape::Dyadic;
  spec.depth = 4;
  spec.law = ValueLaw::Uniform;
  spec.seed = 7;
  Martingale<double> g = instantiate<double>(resolve(spec));

  double serial_val = 0, parallel_val = 0;
  double t_serial = 1e300, t_parallel = 1e300;
  for (int i = 0; i < reps; ++i) {
    t_serial = std::min(t_serial, time_of([&] {
                          serial_val = bmo_stopping_norm(g, 2.0, 1.0, 1'000'000, false);
                        }));
    t_parallel = std::min(t_parallel, time_of([&] {
                            parallel_val = bmo_stopping_norm(g, 2.0, 1.0, 1'000'000, true);
                          }));
  }
  std::printf("bmo stopping scan (binary depth 4, 458330 stopping times)\n");
  std::printf("  serial:   %8.1f ms  value %.12g\n", 1e3 * t_serial, serial_val);
  std::printf("  parallel: %8.1f ms  value %.12g\n", 1e3 * t_parallel, parallel_val);
  std::printf("  speedup:  %.2fx, values %s\n\n", t_serial / t_parallel,
              serial_val == parallel_val ? "identical" : "DIFFER");

  // batch experiment driver
  ExperimentConfig cfg;
  cfg.name = "atomic-validate";
  cfg.instances = 200;
  cfg.depth = 4;
  cfg.shape = TreeShape::Random;
  cfg.law = ValueLaw::Uniform;
  cfg.p = 1;
  std::string csv_serial, csv_parallel;
  double tb_serial = 1e300, tb_parallel = 1e300;
  for (int i = 0; i < reps; ++i) {
    set_threads(1);
    tb_serial = std::min(
        tb_serial, time_of([&] { csv_serial = to_csv(run_experiment<double>(cfg)); }));
    set_threads(max_threads);
    tb_parallel = std::min(
        tb_parallel, time_of([&] { csv_parallel = to_csv(run_experiment<double>(cfg)); }));
  }
  std::printf("batch driver (atomic-validate, 200 random depth-4 instances)\n");
  std::printf("  1 thread:  %8.1f ms\n", 1e3 * tb_serial);
  std::printf("  %d threads: %8.1f ms\n", max_threads, tb_parallel * 1e3);
  std::printf("  speedup:   %.2fx, outputs %s\n", tb_serial / tb_parallel,
              csv_serial == csv_parallel ? "byte-identical" : "DIFFER");
  return csv_serial == csv_parallel && serial_val == parallel_val ? 0 : 1;
}
