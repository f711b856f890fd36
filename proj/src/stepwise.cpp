#include "rsd/stepwise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rsd/statistics.hpp"

namespace rsd {

void StatisticTable::validate() const {
  if (pairs.size() != values.size())
    throw std::invalid_argument("statistic table: pairs/values size mismatch");
  if (pairs.empty()) throw std::invalid_argument("statistic table is empty");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("statistic table has a non-finite value");
}

namespace {

void check_lengths(const StatisticTable& stats, const CriticalValues& criticals) {
  stats.validate();
  criticals.validate();
  if (criticals.size() != static_cast<int>(stats.pairs.size()))
    throw std::invalid_argument("need exactly one critical value per hypothesis (" +
                                std::to_string(stats.pairs.size()) + " hypotheses, " +
                                std::to_string(criticals.size()) + " critical values)");
}

// Indices ordered most significant first; statistic ties fall back to pair
// order so results do not depend on storage order.
std::vector<size_t> significance_order(const StatisticTable& stats) {
  std::vector<size_t> order(stats.pairs.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (stats.values[a] != stats.values[b]) return stats.values[a] > stats.values[b];
    return stats.pairs[a] < stats.pairs[b];
  });
  return order;
}

}  // namespace

DecisionReport step_down(const StatisticTable& stats, const CriticalValues& criticals) {
  check_lengths(stats, criticals);
  const int K = criticals.size();
  const auto order = significance_order(stats);

  DecisionReport report;
  report.decisions.resize(stats.pairs.size());
  for (size_t idx = 0; idx < stats.pairs.size(); ++idx) {
    report.decisions[idx] = {stats.pairs[idx].first, stats.pairs[idx].second, false,
                             stats.values[idx], 0};
  }
  for (int m = 1; m <= K; ++m) {
    const size_t idx = order[static_cast<size_t>(m - 1)];
    const double threshold = criticals.values[static_cast<size_t>(K - m)];  // C_{K-(m-1)}
    if (!(stats.values[idx] > threshold)) break;  // accept all remaining
    report.decisions[idx].reject = true;
    report.decisions[idx].stage = m;
  }
  return report;
}

DecisionReport step_up(const StatisticTable& stats, const CriticalValues& criticals) {
  check_lengths(stats, criticals);
  const int K = criticals.size();
  const auto order = significance_order(stats);

  DecisionReport report;
  report.decisions.resize(stats.pairs.size());
  for (size_t idx = 0; idx < stats.pairs.size(); ++idx) {
    report.decisions[idx] = {stats.pairs[idx].first, stats.pairs[idx].second, false,
                             stats.values[idx], 0};
  }
  // order[r-1] holds the r-th largest statistic, i.e. T_(K+1-r); scan from
  // the least significant for the first T_(m) > C_m.
  int first_violation = 0;  // 1-based m, 0 = none
  for (int m = 1; m <= K; ++m) {
    const size_t idx = order[static_cast<size_t>(K - m)];
    if (stats.values[idx] > criticals.values[static_cast<size_t>(m - 1)]) {
      first_violation = m;
      break;
    }
  }
  if (first_violation > 0) {
    const int reject_count = K + 1 - first_violation;
    for (int r = 1; r <= reject_count; ++r) {
      const size_t idx = order[static_cast<size_t>(r - 1)];
      report.decisions[idx].reject = true;
      report.decisions[idx].stage = r;
    }
  }
  return report;
}

namespace {

// One-sided statistics are signed toward the putatively larger population:
// (earlier, later) for change point and (control, treatment) for treatments
// versus control.
std::pair<int, int> oriented(const ProblemFamily& family, std::pair<int, int> pair) {
  if (family.shape == ProblemShape::treatments_vs_control) {
    const int c = family.control_index();
    const int treatment = pair.first == c ? pair.second : pair.first;
    return {c, treatment};
  }
  return pair;
}

void require_two_sided_for_all_pairwise(const ProblemFamily& family, Sidedness sided) {
  if (family.shape == ProblemShape::all_pairwise && sided == Sidedness::one_sided)
    throw std::invalid_argument("one-sided alternatives are not defined for all-pairwise families");
}

}  // namespace

StatisticTable pairwise_stats(const ContingencyTable& table, const ProblemFamily& family,
                              Sidedness sided) {
  table.validate();
  family.validate();
  require_two_sided_for_all_pairwise(family, sided);
  if (table.rows() != family.k)
    throw std::invalid_argument("pairwise_stats: table rows and family k disagree");

  StatisticTable out;
  out.sided = sided;
  out.pairs = family.pairs();
  out.values.reserve(out.pairs.size());
  for (auto pr : out.pairs) {
    auto [a, b] = oriented(family, pr);
    const double z = wmw_midrank_z(table.counts[static_cast<size_t>(a)],
                                   table.counts[static_cast<size_t>(b)]);
    out.values.push_back(sided == Sidedness::two_sided ? std::fabs(z) : z);
  }
  return out;
}

StatisticTable pairwise_stats(const SampleMatrix& data, const ProblemFamily& family,
                              PairStatKind kind, Sidedness sided, int rank_n_per_pop,
                              double rank_w_override) {
  data.validate();
  family.validate();
  require_two_sided_for_all_pairwise(family, sided);
  if (data.rows() != family.k)
    throw std::invalid_argument("pairwise_stats: data rows and family k disagree");
  if (kind == PairStatKind::wmw)
    throw std::invalid_argument("pairwise_stats: WMW statistics need a contingency table");

  StatisticTable out;
  out.sided = sided;
  out.pairs = family.pairs();
  out.values.reserve(out.pairs.size());

  for (auto pr : out.pairs) {
    auto [a, b] = oriented(family, pr);
    const auto& row_a = data.values[static_cast<size_t>(a)];
    const auto& row_b = data.values[static_cast<size_t>(b)];
    double t = 0.0;
    switch (kind) {
      case PairStatKind::chisq:
        if (sided == Sidedness::one_sided)
          throw std::invalid_argument("chisq pair statistic has no one-sided form");
        t = chisq_pair_stat(row_a, row_b);
        break;
      case PairStatKind::z_difference: {
        if (data.cols() != 1)
          throw std::invalid_argument("z-difference statistic needs q = 1");
        t = (row_b[0] - row_a[0]) / std::sqrt(2.0);
        if (sided == Sidedness::two_sided) t = std::fabs(t);
        break;
      }
      case PairStatKind::difference: {
        if (data.cols() != 1)
          throw std::invalid_argument("difference statistic needs q = 1");
        t = row_b[0] - row_a[0];
        if (sided == Sidedness::two_sided) t = std::fabs(t);
        break;
      }
      case PairStatKind::rank_z: {
        if (data.kind != SampleMatrix::Kind::rank_means || data.cols() != 1)
          throw std::invalid_argument("rank-z statistic needs k x 1 rank means");
        // rank_h on singleton groups with per-population totals n * R_i.
        std::vector<double> totals(static_cast<size_t>(family.k));
        for (int i = 0; i < family.k; ++i)
          totals[static_cast<size_t>(i)] =
              rank_n_per_pop * data.values[static_cast<size_t>(i)][0];
        t = rank_h({b}, {a}, totals, rank_n_per_pop, family.k, sided, rank_w_override);
        break;
      }
      case PairStatKind::wmw:
        break;  // unreachable
    }
    out.values.push_back(t);
  }
  return out;
}

}  // namespace rsd
