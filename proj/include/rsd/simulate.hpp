#ifndef RSD_SIMULATE_HPP
#define RSD_SIMULATE_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "rsd/types.hpp"

namespace rsd {

/// Inclusive 1-based range of treatment indices sharing one mean.
struct MeanBlock {
  int first = 0;
  int last = 0;
  double mean = 0.0;
};

/// Treatments-versus-control study: populations 1..k-1 are treatments, the
/// control is population k with mean 0. Unlisted treatments have mean 0.
struct SimConfig {
  int k = 101;
  std::vector<MeanBlock> blocks;
  int iterations = 5000;
  double rsd_alpha = 0.05;  // feeds the step-down constants
  double su_alpha = 0.07;   // feeds the step-up constants
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> means() const;  // per-population, control last
};

struct Metric {
  double mean = 0.0;
  double mcse = 0.0;  // Monte Carlo standard error of the mean
};

struct ProcedureMetrics {
  Metric type1, type2, total, fdr;
};

struct SimResult {
  ProcedureMetrics rsd, su;
  Metric total_diff;  // per-iteration rsd total minus su total
  int iterations = 0;
};

enum class ExecMode { serial, parallel };

/// Per iteration: draws X_i ~ N(mu_i, 1), runs the residual step-down with
/// BG constants at rsd_alpha on the pooled |mean difference| statistic, and
/// the step-up with BH constants at su_alpha on |x_i - x_k|/sqrt(2); tallies
/// Type I / Type II errors and the false discovery proportion (0 when
/// nothing is rejected). Results are bit-identical across exec modes and
/// thread counts: every iteration owns an RNG substream and the reduction
/// runs in iteration order.
SimResult simulate(const SimConfig& config, ExecMode mode = ExecMode::parallel);

/// Published comparison values for one parameter point.
struct PaperRow {
  double rsd_type1, su_type1, rsd_type2, su_type2, rsd_total, su_total, rsd_fdr, su_fdr;
};

/// The 17 mean triples shared by both study tables.
struct RowMeans {
  double m1, m2, m3;
};
const std::array<RowMeans, 17>& study_rows();

/// Study table 5: 5-treatment blocks, rsd_alpha 0.05; table 6: 8-treatment
/// blocks, rsd_alpha 0.03. Both use su_alpha 0.07 and k = 101. The published
/// mean columns are standardized pairwise differences; the returned config
/// carries the corresponding population means (listed value times sqrt(2)).
SimConfig table_config(int table, int row, int iterations, std::uint64_t seed);
PaperRow paper_row(int table, int row);

struct RowComparison {
  int table = 0, row = 0;
  RowMeans means{};
  SimConfig config;
  SimResult sim;
  PaperRow paper{};
};

/// Runs the requested rows of a study table and pairs the simulated metrics
/// with the published ones.
std::vector<RowComparison> table_runner(int table, const std::vector<int>& rows, int iterations,
                                        std::uint64_t seed, ExecMode mode = ExecMode::parallel);

}  // namespace rsd

#endif  // RSD_SIMULATE_HPP
