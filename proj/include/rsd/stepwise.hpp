#ifndef RSD_STEPWISE_HPP
#define RSD_STEPWISE_HPP

#include <utility>
#include <vector>

#include "rsd/types.hpp"

namespace rsd {

/// One statistic per hypothesis pair in Q.
struct StatisticTable {
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> values;
  Sidedness sided = Sidedness::two_sided;

  void validate() const;
};

/// Usual step-down procedure: repeatedly test the largest remaining
/// statistic, at step m against C_{K-(m-1)}; the first failure accepts all
/// remaining hypotheses. Rejections carry their 1-based step.
DecisionReport step_down(const StatisticTable& stats, const CriticalValues& criticals);

/// Step-up procedure: order T_(1) <= ... <= T_(K) against C_1 <= ... <= C_K
/// starting from the least significant statistic; the first m with
/// T_(m) > C_m rejects that hypothesis and every more significant one.
/// Statistic ties share a deterministic order (by pair index). Rejections
/// carry their 1-based rank from the top.
DecisionReport step_up(const StatisticTable& stats, const CriticalValues& criticals);

enum class PairStatKind {
  wmw,           // midrank Z on a 2 x q cell-count table
  chisq,         // (x_i - x_j)'(x_i - x_j)/2
  z_difference,  // (x_i - x_j)/sqrt(2) for q = 1
  difference,    // raw x_j - x_i (the prototype scale used by the audit)
  rank_z,        // |R_i - R_j| / sigma_{{i},{j}} on joint-rank means
};

/// Fills T_ij for each pair in the family from per-population data. One-sided
/// statistics are signed toward the family's alternative: the later
/// population for change point, the treatment for treatments versus control.
StatisticTable pairwise_stats(const ContingencyTable& table, const ProblemFamily& family,
                              Sidedness sided);
StatisticTable pairwise_stats(const SampleMatrix& data, const ProblemFamily& family,
                              PairStatKind kind, Sidedness sided, int rank_n_per_pop = 1,
                              double rank_w_override = 0.0);

}  // namespace rsd

#endif  // RSD_STEPWISE_HPP
