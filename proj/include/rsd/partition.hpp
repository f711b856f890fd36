#ifndef RSD_PARTITION_HPP
#define RSD_PARTITION_HPP

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rsd/types.hpp"

namespace rsd {

/// Pooled-group summary for one side of a candidate split: the number of
/// populations pooled and the coordinatewise raw sums of their data rows.
struct Pool {
  int n_pops = 0;
  std::vector<double> sums;

  void reset(size_t dim) {
    n_pops = 0;
    sums.assign(dim, 0.0);
  }
};

/// Model adapter the partition engine evaluates candidate splits through.
/// h(a, b) is H(A, B\A; x) with the convention that a positive one-sided
/// value means side b exceeds side a; two-sided forms are nonnegative.
/// Models own a flat row-major copy of their data; h is const and
/// allocation-free so candidate evaluation can run concurrently.
class PooledModel {
 public:
  virtual ~PooledModel() = default;
  virtual int population_count() const = 0;
  virtual size_t dim() const = 0;
  virtual Sidedness sidedness() const = 0;
  virtual void accumulate(Pool& pool, int member) const = 0;
  virtual double h(const Pool& a, const Pool& b) const = 0;

  Pool make_pool(std::span<const int> members) const;
};

/// Multinomial rows compared with the WMW midrank Z on pooled 2 x q tables.
/// Pooled rows are cell-count averages by default; raw_sums = true pools by
/// summing instead.
class MultinomialWmwModel final : public PooledModel {
 public:
  MultinomialWmwModel(std::vector<double> flat, int k, int q, Sidedness sided,
                      bool raw_sums = false);
  int population_count() const override { return k_; }
  size_t dim() const override { return static_cast<size_t>(q_); }
  Sidedness sidedness() const override { return sided_; }
  void accumulate(Pool& pool, int member) const override;
  double h(const Pool& a, const Pool& b) const override;

 private:
  std::vector<double> flat_;
  int k_, q_;
  Sidedness sided_;
  bool raw_sums_;
};

/// Normal observation vectors compared on pooled means: the standardized
/// mean difference for q = 1 and the chi-squared-scale quadratic form for
/// q > 1 (two-sided only there).
class NormalMeanModel final : public PooledModel {
 public:
  NormalMeanModel(std::vector<double> flat, int k, int q, Sidedness sided);
  int population_count() const override { return k_; }
  size_t dim() const override { return static_cast<size_t>(q_); }
  Sidedness sidedness() const override { return sided_; }
  void accumulate(Pool& pool, int member) const override;
  double h(const Pool& a, const Pool& b) const override;

 private:
  std::vector<double> flat_;
  int k_, q_;
  Sidedness sided_;
};

/// Joint-rank means compared on pooled per-observation rank averages with
/// variance scale w (defaults to k(kn+1)).
class JointRankModel final : public PooledModel {
 public:
  JointRankModel(std::vector<double> rank_means, int k, int n_per_pop, Sidedness sided,
                 double w_override = 0.0);
  int population_count() const override { return k_; }
  size_t dim() const override { return 1; }
  Sidedness sidedness() const override { return sided_; }
  void accumulate(Pool& pool, int member) const override;
  double h(const Pool& a, const Pool& b) const override;

 private:
  std::vector<double> rank_means_;
  int k_, n_;
  Sidedness sided_;
  double w_;
};

/// Builds the engine-facing model for a data set. Multinomial tables use the
/// WMW statistic; sample matrices use the pooled normal form or the
/// joint-rank form depending on their kind.
std::unique_ptr<PooledModel> make_model(const ContingencyTable& table, Sidedness sided,
                                        bool raw_sum_pooling = false);
std::unique_ptr<PooledModel> make_model(const SampleMatrix& data, Sidedness sided,
                                        int rank_n_per_pop = 1, double rank_w_override = 0.0);

/// Public pooling helper: the averaged row for multinomial data, the group
/// mean for normal data, (total rank sum, N(A)) for rank data. Mirrors how
/// the engine pools, in display form.
struct PooledSummary {
  int n_pops = 0;
  double weight = 0.0;  // n(A) for multinomial/normal, N(A) = n*|A| for rank data
  std::vector<double> values;
};
PooledSummary pool(std::span<const int> members, const ContingencyTable& table,
                   bool raw_sums = false);
PooledSummary pool(std::span<const int> members, const SampleMatrix& data, int rank_n_per_pop = 1);

struct SplitCandidate {
  std::vector<int> a;
  std::vector<int> rest;
  double h = 0.0;
};

struct DispersionResult {
  std::vector<int> a_b;   // maximizing admissible A
  std::vector<int> rest;  // B \ A
  double d = 0.0;
};

/// Whether a block may be split under the family (membership in Omega).
bool block_eligible(const ProblemFamily& family, std::span<const int> block);

/// Blocks with more than this many elements are rejected for all-pairwise
/// splitting (2^(|B|-1) - 1 candidates).
inline constexpr int kAllPairwiseBlockCap = 20;

/// D(B; x): maximizes H over admissible splits of `block`. Ties pick the
/// lexicographically smallest A. Pass `record` to capture every candidate.
DispersionResult dispersion_max(std::span<const int> block, const ProblemFamily& family,
                                const PooledModel& model,
                                std::vector<SplitCandidate>* record = nullptr);

struct TraceStep {
  int stage = 0;  // 1-based
  std::vector<int> block;
  std::vector<int> split_a;
  std::vector<int> split_rest;
  double h = 0.0;
  double threshold = 0.0;
};

struct StageRecord {
  int stage = 0;
  double threshold = 0.0;
  std::vector<SplitCandidate> candidates;  // all admissible splits of all eligible blocks
  bool split_executed = false;
};

struct PartitionTrace {
  std::vector<TraceStep> steps;
  std::vector<std::vector<int>> final_blocks;
  std::vector<StageRecord> stage_details;  // filled when requested
};

struct RsdOptions {
  bool record_candidates = false;
};

struct RsdResult {
  PartitionTrace trace;
  DecisionReport report;
};

/// Runs the residual step-down partition loop: starting from the single
/// block {0..k-1}, stage m splits the block with the largest D(B; x) when it
/// strictly exceeds C_{K+1-m}, and stops otherwise. H_ij is rejected exactly
/// when i and j land in different final blocks.
RsdResult rsd_run(const PooledModel& model, const ProblemFamily& family,
                  const CriticalValues& criticals, const RsdOptions& options = {});

/// Decisions induced by an arbitrary partition: reject H_ij iff i and j lie
/// in different blocks.
DecisionReport decisions_from_partition(const std::vector<std::vector<int>>& blocks,
                                        const ProblemFamily& family);

}  // namespace rsd

#endif  // RSD_PARTITION_HPP
