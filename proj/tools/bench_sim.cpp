// Times the serial reference against the OpenMP simulation path on one study
// row and checks that both produce identical results.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rsd/simulate.hpp"

namespace {

double seconds(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

int main(int argc, char** argv) {
  int iterations = 2000;
  if (argc > 1) iterations = std::atoi(argv[1]);

  const rsd::SimConfig cfg = rsd::table_config(5, 4, iterations, 20240101);
#ifdef _OPENMP
  const int threads = omp_get_max_threads();
#else
  const int threads = 1;
#endif
  std::printf("k = %d, iterations = %d, threads = %d\n", cfg.k, cfg.iterations, threads);

  const auto t0 = std::chrono::steady_clock::now();
  const rsd::SimResult serial = rsd::simulate(cfg, rsd::ExecMode::serial);
  const auto t1 = std::chrono::steady_clock::now();
  const rsd::SimResult parallel = rsd::simulate(cfg, rsd::ExecMode::parallel);
  const auto t2 = std::chrono::steady_clock::now();

  const double ts = seconds(t0, t1), tp = seconds(t1, t2);
  std::printf("serial   %8.3f s   (rsd total %.3f, su total %.3f)\n", ts, serial.rsd.total.mean,
              serial.su.total.mean);
  std::printf("openmp   %8.3f s   (rsd total %.3f, su total %.3f)\n", tp, parallel.rsd.total.mean,
              parallel.su.total.mean);
  std::printf("speedup  %8.2fx\n", ts / tp);

  auto same_metric = [](const rsd::Metric& a, const rsd::Metric& b) {
    return a.mean == b.mean && a.mcse == b.mcse;
  };
  auto same = [&](const rsd::ProcedureMetrics& a, const rsd::ProcedureMetrics& b) {
    return same_metric(a.type1, b.type1) && same_metric(a.type2, b.type2) &&
           same_metric(a.total, b.total) && same_metric(a.fdr, b.fdr);
  };
  const bool identical = same(serial.rsd, parallel.rsd) && same(serial.su, parallel.su) &&
                         same_metric(serial.total_diff, parallel.total_diff);
  std::printf("results bit-identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
