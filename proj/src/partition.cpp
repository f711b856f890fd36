#include "rsd/partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rsd/statistics.hpp"

namespace rsd {

namespace {

void subtract_into(const Pool& total, const Pool& part, Pool& out) {
  out.n_pops = total.n_pops - part.n_pops;
  out.sums.resize(total.sums.size());
  for (size_t l = 0; l < total.sums.size(); ++l) out.sums[l] = total.sums[l] - part.sums[l];
}

bool is_consecutive_run(std::span<const int> block) {
  for (size_t i = 1; i < block.size(); ++i)
    if (block[i] != block[i - 1] + 1) return false;
  return true;
}

// Lexicographic order on the sorted element lists encoded by two subset
// masks over a common ascending element array (common fixed first element
// not included in the masks).
bool lex_mask_less(std::uint32_t a, std::uint32_t b) {
  const std::uint32_t d = a ^ b;
  if (d == 0) return false;
  const std::uint32_t low = d & (~d + 1);
  const bool a_owns = (a & low) != 0;
  const std::uint32_t other = a_owns ? b : a;
  const bool other_continues = (other & ~(low | (low - 1))) != 0;
  // The owner's list continues with the lower element, so it is smaller
  // unless the other list ends here (a strict prefix is smaller).
  return a_owns ? other_continues : !other_continues;
}

}  // namespace

Pool PooledModel::make_pool(std::span<const int> members) const {
  Pool p;
  p.reset(dim());
  for (int m : members) accumulate(p, m);
  return p;
}

MultinomialWmwModel::MultinomialWmwModel(std::vector<double> flat, int k, int q,
                                         Sidedness sided, bool raw_sums)
    : flat_(std::move(flat)), k_(k), q_(q), sided_(sided), raw_sums_(raw_sums) {
  if (k < 2 || q < 2 || flat_.size() != static_cast<size_t>(k) * static_cast<size_t>(q))
    throw std::invalid_argument("MultinomialWmwModel: bad dimensions");
}

void MultinomialWmwModel::accumulate(Pool& pool, int member) const {
  const double* row = flat_.data() + static_cast<size_t>(member) * q_;
  for (int l = 0; l < q_; ++l) pool.sums[static_cast<size_t>(l)] += row[l];
  ++pool.n_pops;
}

double MultinomialWmwModel::h(const Pool& a, const Pool& b) const {
  // Inline midrank Z on the two pooled rows (scaled by 1/n_pops unless raw
  // sums are requested); kept allocation-free so candidate loops can run
  // concurrently. Unit tests pin this to wmw_midrank_z on the scaled rows.
  const double scale_a = raw_sums_ ? 1.0 : 1.0 / a.n_pops;
  const double scale_b = raw_sums_ ? 1.0 : 1.0 / b.n_pops;
  double m = 0.0, n = 0.0;
  for (int l = 0; l < q_; ++l) {
    m += a.sums[static_cast<size_t>(l)] * scale_a;
    n += b.sums[static_cast<size_t>(l)] * scale_b;
  }
  if (m <= 0.0 || n <= 0.0) throw std::invalid_argument("wmw pooled row total is zero");
  double cum = 0.0, w = 0.0;
  for (int l = 0; l < q_; ++l) {
    const double ca = a.sums[static_cast<size_t>(l)] * scale_a;
    const double cb = b.sums[static_cast<size_t>(l)] * scale_b;
    const double pooled = ca + cb;
    w += cb * (cum + (pooled + 1.0) / 2.0);
    cum += pooled;
  }
  const double total = m + n;
  const double z = (w - n * (total + 1.0) / 2.0) / std::sqrt(m * n * (total + 1.0) / 12.0);
  return sided_ == Sidedness::two_sided ? std::fabs(z) : z;
}

NormalMeanModel::NormalMeanModel(std::vector<double> flat, int k, int q, Sidedness sided)
    : flat_(std::move(flat)), k_(k), q_(q), sided_(sided) {
  if (k < 2 || q < 1 || flat_.size() != static_cast<size_t>(k) * static_cast<size_t>(q))
    throw std::invalid_argument("NormalMeanModel: bad dimensions");
  if (q > 1 && sided == Sidedness::one_sided)
    throw std::invalid_argument("NormalMeanModel: one-sided form needs q = 1");
}

void NormalMeanModel::accumulate(Pool& pool, int member) const {
  const double* row = flat_.data() + static_cast<size_t>(member) * q_;
  for (int l = 0; l < q_; ++l) pool.sums[static_cast<size_t>(l)] += row[l];
  ++pool.n_pops;
}

double NormalMeanModel::h(const Pool& a, const Pool& b) const {
  const double n_a = a.n_pops, n_b = b.n_pops;
  const double tau2 = 1.0 / n_a + 1.0 / n_b;
  if (q_ == 1) {
    const double z = (b.sums[0] / n_b - a.sums[0] / n_a) / std::sqrt(tau2);
    return sided_ == Sidedness::two_sided ? std::fabs(z) : z;
  }
  double ss = 0.0;
  for (int l = 0; l < q_; ++l) {
    const double d = a.sums[static_cast<size_t>(l)] / n_a - b.sums[static_cast<size_t>(l)] / n_b;
    ss += d * d;
  }
  return ss / tau2;
}

JointRankModel::JointRankModel(std::vector<double> rank_means, int k, int n_per_pop,
                               Sidedness sided, double w_override)
    : rank_means_(std::move(rank_means)), k_(k), n_(n_per_pop), sided_(sided) {
  if (k < 2 || n_per_pop < 1 || rank_means_.size() != static_cast<size_t>(k))
    throw std::invalid_argument("JointRankModel: bad dimensions");
  w_ = w_override > 0.0 ? w_override : rank_w_default(k, n_per_pop);
}

void JointRankModel::accumulate(Pool& pool, int member) const {
  pool.sums[0] += rank_means_[static_cast<size_t>(member)];
  ++pool.n_pops;
}

double JointRankModel::h(const Pool& a, const Pool& b) const {
  // Pool sums hold rank-mean totals; the per-observation mean over A is
  // n * sum / N(A) = sum / n_pops, and sigma uses N(A) = n * n_pops.
  const double big_n_a = static_cast<double>(n_) * a.n_pops;
  const double big_n_b = static_cast<double>(n_) * b.n_pops;
  const double sigma = std::sqrt(w_ * (1.0 / big_n_a + 1.0 / big_n_b) / 12.0);
  const double h = (b.sums[0] / b.n_pops - a.sums[0] / a.n_pops) / sigma;
  return sided_ == Sidedness::two_sided ? std::fabs(h) : h;
}

std::unique_ptr<PooledModel> make_model(const ContingencyTable& table, Sidedness sided,
                                        bool raw_sum_pooling) {
  table.validate();
  return std::make_unique<MultinomialWmwModel>(table.flat(), table.rows(), table.cols(), sided,
                                               raw_sum_pooling);
}

std::unique_ptr<PooledModel> make_model(const SampleMatrix& data, Sidedness sided,
                                        int rank_n_per_pop, double rank_w_override) {
  data.validate();
  if (data.kind == SampleMatrix::Kind::rank_means) {
    if (data.cols() != 1)
      throw std::invalid_argument("rank-means data must have a single column");
    return std::make_unique<JointRankModel>(data.flat(), data.rows(), rank_n_per_pop, sided,
                                            rank_w_override);
  }
  return std::make_unique<NormalMeanModel>(data.flat(), data.rows(), data.cols(), sided);
}

PooledSummary pool(std::span<const int> members, const ContingencyTable& table, bool raw_sums) {
  if (members.empty()) throw std::invalid_argument("pool: empty index set");
  PooledSummary s;
  s.n_pops = static_cast<int>(members.size());
  s.weight = s.n_pops;
  s.values.assign(static_cast<size_t>(table.cols()), 0.0);
  for (int m : members) {
    const auto& row = table.counts.at(static_cast<size_t>(m));
    for (size_t l = 0; l < row.size(); ++l) s.values[l] += row[l];
  }
  if (!raw_sums)
    for (double& v : s.values) v /= s.n_pops;
  return s;
}

PooledSummary pool(std::span<const int> members, const SampleMatrix& data, int rank_n_per_pop) {
  if (members.empty()) throw std::invalid_argument("pool: empty index set");
  PooledSummary s;
  s.n_pops = static_cast<int>(members.size());
  if (data.kind == SampleMatrix::Kind::rank_means) {
    double total = 0.0;
    for (int m : members) total += data.values.at(static_cast<size_t>(m)).at(0);
    s.weight = static_cast<double>(rank_n_per_pop) * s.n_pops;
    s.values = {static_cast<double>(rank_n_per_pop) * total};
    return s;
  }
  s.weight = s.n_pops;
  s.values.assign(static_cast<size_t>(data.cols()), 0.0);
  for (int m : members) {
    const auto& row = data.values.at(static_cast<size_t>(m));
    for (size_t l = 0; l < row.size(); ++l) s.values[l] += row[l];
  }
  for (double& v : s.values) v /= s.n_pops;
  return s;
}

bool block_eligible(const ProblemFamily& family, std::span<const int> block) {
  if (block.size() < 2) return false;
  switch (family.shape) {
    case ProblemShape::change_point:
      return is_consecutive_run(block);
    case ProblemShape::treatments_vs_control:
      return std::find(block.begin(), block.end(), family.control_index()) != block.end();
    case ProblemShape::all_pairwise:
      return true;
  }
  return false;
}

DispersionResult dispersion_max(std::span<const int> block, const ProblemFamily& family,
                                const PooledModel& model, std::vector<SplitCandidate>* record) {
  if (!block_eligible(family, block))
    throw std::invalid_argument("dispersion_max: block has no admissible split (not in Omega)");

  DispersionResult best;
  bool have_best = false;
  const size_t len = block.size();

  switch (family.shape) {
    case ProblemShape::change_point: {
      // Boundary splits (left | right); H is oriented so a positive
      // one-sided value means the right part exceeds the left.
      std::vector<Pool> suffix(len);
      {
        Pool acc;
        acc.reset(model.dim());
        for (size_t i = len; i-- > 0;) {
          model.accumulate(acc, block[i]);
          suffix[i] = acc;
        }
      }
      Pool left;
      left.reset(model.dim());
      for (size_t b = 0; b + 1 < len; ++b) {
        model.accumulate(left, block[b]);
        const double hval = model.h(left, suffix[b + 1]);
        if (record)
          record->push_back({{block.begin(), block.begin() + b + 1},
                             {block.begin() + b + 1, block.end()},
                             hval});
        // Prefixes are visited in lexicographic order, so strict > keeps
        // the tie-break deterministic.
        if (!have_best || hval > best.d) {
          best.d = hval;
          best.a_b.assign(block.begin(), block.begin() + b + 1);
          best.rest.assign(block.begin() + b + 1, block.end());
          have_best = true;
        }
      }
      break;
    }

    case ProblemShape::treatments_vs_control: {
      // A is a single treatment; H is oriented so a positive one-sided
      // value means the treatment exceeds the pooled remainder.
      const int control = family.control_index();
      const Pool total = model.make_pool(block);
      Pool a, rest;
      a.reset(model.dim());
      rest.reset(model.dim());
      for (size_t t = 0; t < len; ++t) {
        if (block[t] == control) continue;
        a.reset(model.dim());
        model.accumulate(a, block[t]);
        subtract_into(total, a, rest);
        const double hval = model.h(rest, a);
        if (record) {
          std::vector<int> rest_members;
          rest_members.reserve(len - 1);
          for (size_t u = 0; u < len; ++u)
            if (u != t) rest_members.push_back(block[u]);
          record->push_back({{block[t]}, std::move(rest_members), hval});
        }
        if (!have_best || hval > best.d) {
          best.d = hval;
          best.a_b.assign(1, block[t]);
          best.rest.clear();
          for (size_t u = 0; u < len; ++u)
            if (u != t) best.rest.push_back(block[u]);
          have_best = true;
        }
      }
      break;
    }

    case ProblemShape::all_pairwise: {
      if (model.sidedness() == Sidedness::one_sided)
        throw std::invalid_argument(
            "one-sided alternatives are not defined for all-pairwise families");
      if (len > static_cast<size_t>(kAllPairwiseBlockCap))
        throw std::invalid_argument(
            "dispersion_max: all-pairwise block exceeds " +
            std::to_string(kAllPairwiseBlockCap) +
            " elements (split enumeration is exponential in the block size)");
      const int r = static_cast<int>(len) - 1;
      const std::uint32_t n_masks = (1u << r) - 1;  // masks over block[1..]; full mask excluded
      const Pool total = model.make_pool(block);

      struct Best {
        double d = 0.0;
        std::uint32_t mask = 0;
        bool set = false;
      };
      auto scan_range = [&](std::uint32_t lo, std::uint32_t hi, Pool& a, Pool& rest) {
        Best local;
        for (std::uint32_t mask = lo; mask < hi; ++mask) {
          a.reset(model.dim());
          model.accumulate(a, block[0]);
          for (int bit = 0; bit < r; ++bit)
            if (mask & (1u << bit)) model.accumulate(a, block[static_cast<size_t>(bit) + 1]);
          subtract_into(total, a, rest);
          const double hval = model.h(a, rest);
          if (record) {
            SplitCandidate cand;
            cand.a.push_back(block[0]);
            for (int bit = 0; bit < r; ++bit)
              if (mask & (1u << bit)) cand.a.push_back(block[static_cast<size_t>(bit) + 1]);
            for (int bit = 0; bit < r; ++bit)
              if (!(mask & (1u << bit))) cand.rest.push_back(block[static_cast<size_t>(bit) + 1]);
            cand.h = hval;
            record->push_back(std::move(cand));
          }
          if (!local.set || hval > local.d ||
              (hval == local.d && lex_mask_less(mask, local.mask))) {
            local.d = hval;
            local.mask = mask;
            local.set = true;
          }
        }
        return local;
      };

      Best overall;
#ifdef _OPENMP
      if (n_masks >= 4096 && record == nullptr) {
        std::vector<Best> partial;
#pragma omp parallel
        {
#pragma omp single
          partial.resize(static_cast<size_t>(omp_get_num_threads()));
          Pool a, rest;
          a.reset(model.dim());
          rest.reset(model.dim());
          const int tid = omp_get_thread_num();
          const int nt = omp_get_num_threads();
          const std::uint32_t chunk = (n_masks + nt - 1) / nt;
          const std::uint32_t lo = std::min<std::uint32_t>(n_masks, chunk * tid);
          const std::uint32_t hi = std::min<std::uint32_t>(n_masks, lo + chunk);
          partial[static_cast<size_t>(tid)] = scan_range(lo, hi, a, rest);
        }
        for (const Best& p : partial) {
          if (!p.set) continue;
          if (!overall.set || p.d > overall.d ||
              (p.d == overall.d && lex_mask_less(p.mask, overall.mask)))
            overall = p;
        }
      } else
#endif
      {
        Pool a, rest;
        a.reset(model.dim());
        rest.reset(model.dim());
        overall = scan_range(0, n_masks, a, rest);
      }

      best.d = overall.d;
      best.a_b.push_back(block[0]);
      for (int bit = 0; bit < r; ++bit) {
        if (overall.mask & (1u << bit))
          best.a_b.push_back(block[static_cast<size_t>(bit) + 1]);
        else
          best.rest.push_back(block[static_cast<size_t>(bit) + 1]);
      }
      have_best = true;
      break;
    }
  }

  if (!have_best) throw std::invalid_argument("dispersion_max: block has no admissible split");
  return best;
}

RsdResult rsd_run(const PooledModel& model, const ProblemFamily& family,
                  const CriticalValues& criticals, const RsdOptions& options) {
  family.validate();
  criticals.validate();
  if (family.k != model.population_count())
    throw std::invalid_argument("rsd_run: family and model disagree on k");
  const int K = criticals.size();
  if (K < family.max_splits())
    throw std::invalid_argument("rsd_run: need at least " + std::to_string(family.max_splits()) +
                                " critical values, got " + std::to_string(K));

  RsdResult result;
  std::vector<std::vector<int>> blocks(1);
  blocks[0].resize(static_cast<size_t>(family.k));
  for (int i = 0; i < family.k; ++i) blocks[0][static_cast<size_t>(i)] = i;

  for (int stage = 1; stage <= K; ++stage) {
    const double threshold = criticals.values[static_cast<size_t>(K - stage)];  // C_{K+1-m}

    int best_block = -1;
    DispersionResult best;
    StageRecord record;
    record.stage = stage;
    record.threshold = threshold;
    bool any_eligible = false;
    for (size_t b = 0; b < blocks.size(); ++b) {
      if (!block_eligible(family, blocks[b])) continue;
      any_eligible = true;
      DispersionResult dr = dispersion_max(blocks[b], family, model,
                                           options.record_candidates ? &record.candidates : nullptr);
      // Blocks are kept sorted by first element and visited in order, so
      // strict > also makes the cross-block tie-break deterministic.
      if (best_block < 0 || dr.d > best.d) {
        best = std::move(dr);
        best_block = static_cast<int>(b);
      }
    }
    if (!any_eligible) break;

    const bool split = best.d > threshold;
    record.split_executed = split;
    if (options.record_candidates) result.trace.stage_details.push_back(std::move(record));
    if (!split) break;

    TraceStep step;
    step.stage = stage;
    step.block = blocks[static_cast<size_t>(best_block)];
    step.split_a = best.a_b;
    step.split_rest = best.rest;
    step.h = best.d;
    step.threshold = threshold;
    result.trace.steps.push_back(step);

    blocks.erase(blocks.begin() + best_block);
    blocks.push_back(best.a_b);
    blocks.push_back(best.rest);
    std::sort(blocks.begin(), blocks.end(),
              [](const auto& x, const auto& y) { return x.front() < y.front(); });
  }

  result.trace.final_blocks = blocks;
  result.report = decisions_from_partition(blocks, family);

  // Attach the separating split's stage and H value to each rejection.
  for (const TraceStep& step : result.trace.steps) {
    for (Decision& d : result.report.decisions) {
      if (!d.reject || d.stage != 0) continue;
      const bool i_in_a = std::find(step.split_a.begin(), step.split_a.end(), d.i) != step.split_a.end();
      const bool j_in_a = std::find(step.split_a.begin(), step.split_a.end(), d.j) != step.split_a.end();
      const bool i_in_rest =
          std::find(step.split_rest.begin(), step.split_rest.end(), d.i) != step.split_rest.end();
      const bool j_in_rest =
          std::find(step.split_rest.begin(), step.split_rest.end(), d.j) != step.split_rest.end();
      if ((i_in_a && j_in_rest) || (j_in_a && i_in_rest)) {
        d.stage = step.stage;
        d.statistic = step.h;
      }
    }
  }
  return result;
}

DecisionReport decisions_from_partition(const std::vector<std::vector<int>>& blocks,
                                        const ProblemFamily& family) {
  std::vector<int> block_of(static_cast<size_t>(family.k), -1);
  for (size_t b = 0; b < blocks.size(); ++b) {
    for (int member : blocks[b]) {
      if (member < 0 || member >= family.k)
        throw std::invalid_argument("decisions_from_partition: index out of range");
      if (block_of[static_cast<size_t>(member)] != -1)
        throw std::invalid_argument("decisions_from_partition: blocks overlap");
      block_of[static_cast<size_t>(member)] = static_cast<int>(b);
    }
  }
  DecisionReport report;
  for (auto [i, j] : family.pairs()) {
    if (block_of[static_cast<size_t>(i)] == -1 || block_of[static_cast<size_t>(j)] == -1)
      throw std::invalid_argument("decisions_from_partition: partition does not cover the family");
    Decision d;
    d.i = i;
    d.j = j;
    d.reject = block_of[static_cast<size_t>(i)] != block_of[static_cast<size_t>(j)];
    report.decisions.push_back(d);
  }
  return report;
}

}  // namespace rsd
