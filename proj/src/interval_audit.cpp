#include "rsd/interval_audit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rng_util.hpp"
#include "rsd/partition.hpp"
#include "rsd/statistics.hpp"

namespace rsd {

DirectionVector direction_vector(ModelKind model, int k, int q, int i, int j) {
  if (k < 2 || i < 0 || j < 0 || i >= k || j >= k || i == j)
    throw std::invalid_argument("direction_vector: bad population pair");
  DirectionVector d;
  d.model = model;
  d.k = k;
  d.i = i;
  d.j = j;
  switch (model) {
    case ModelKind::multinomial: {
      if (q < 2) throw std::invalid_argument("direction_vector: multinomial needs q >= 2");
      d.q = q;
      d.g.assign(static_cast<size_t>(k) * q, 0.0);
      d.g[static_cast<size_t>(i) * q + 0] = 1.0;        // more of i in the lowest cell
      d.g[static_cast<size_t>(i) * q + (q - 1)] = -1.0;  // less of i in the highest cell
      d.g[static_cast<size_t>(j) * q + 0] = -1.0;
      d.g[static_cast<size_t>(j) * q + (q - 1)] = 1.0;
      break;
    }
    case ModelKind::normal: {
      if (q < 1) throw std::invalid_argument("direction_vector: q must be positive");
      d.q = q;
      d.g.assign(static_cast<size_t>(k) * q, 0.0);
      for (int l = 0; l < q; ++l) {
        d.g[static_cast<size_t>(i) * q + l] = -1.0;
        d.g[static_cast<size_t>(j) * q + l] = 1.0;
      }
      break;
    }
    case ModelKind::rank: {
      d.q = 1;
      d.g.assign(static_cast<size_t>(k), 0.0);
      d.g[static_cast<size_t>(i)] = -1.0;
      d.g[static_cast<size_t>(j)] = 1.0;
      break;
    }
  }
  return d;
}

namespace {

ContingencyTable table_from_flat(const std::vector<double>& flat, int k, int q) {
  ContingencyTable t;
  t.counts.resize(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i)
    t.counts[static_cast<size_t>(i)].assign(flat.begin() + static_cast<long>(i) * q,
                                            flat.begin() + static_cast<long>(i + 1) * q);
  return t;
}

SampleMatrix matrix_from_flat(const std::vector<double>& flat, int k, int q,
                              SampleMatrix::Kind kind) {
  SampleMatrix m;
  m.kind = kind;
  m.values.resize(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i)
    m.values[static_cast<size_t>(i)].assign(flat.begin() + static_cast<long>(i) * q,
                                            flat.begin() + static_cast<long>(i + 1) * q);
  return m;
}

}  // namespace

DecisionProcedure make_procedure(const ProcedureSpec& spec) {
  spec.family.validate();
  spec.criticals.validate();
  const ProcedureSpec s = spec;  // captured by value
  return [s](const std::vector<double>& flat) -> DecisionReport {
    if (s.kind == ProcedureSpec::Kind::rsd) {
      std::unique_ptr<PooledModel> model;
      switch (s.model) {
        case ModelKind::multinomial:
          model = std::make_unique<MultinomialWmwModel>(flat, s.family.k, s.q, s.sided,
                                                        s.multinomial_raw_sums);
          break;
        case ModelKind::normal:
          model = std::make_unique<NormalMeanModel>(flat, s.family.k, s.q, s.sided);
          break;
        case ModelKind::rank:
          model = std::make_unique<JointRankModel>(flat, s.family.k, s.rank_n_per_pop, s.sided,
                                                   s.rank_w_override);
          break;
      }
      return rsd_run(*model, s.family, s.criticals).report;
    }
    StatisticTable stats;
    if (s.model == ModelKind::multinomial) {
      stats = pairwise_stats(table_from_flat(flat, s.family.k, s.q), s.family, s.sided);
    } else {
      const auto kind = s.model == ModelKind::rank ? SampleMatrix::Kind::rank_means
                                                   : SampleMatrix::Kind::normal;
      stats = pairwise_stats(matrix_from_flat(flat, s.family.k, s.q, kind), s.family, s.pair_stat,
                             s.sided, s.rank_n_per_pop, s.rank_w_override);
    }
    return s.kind == ProcedureSpec::Kind::step_down ? step_down(stats, s.criticals)
                                                    : step_up(stats, s.criticals);
  };
}

RayScan ray_decisions(const DecisionProcedure& procedure, const std::vector<double>& x,
                      const DirectionVector& direction, const std::vector<double>& a_grid,
                      bool survey_clip) {
  if (direction.g.size() != x.size())
    throw std::invalid_argument("ray_decisions: direction and data dimensions disagree");
  if (a_grid.empty() || a_grid.front() != 0.0)
    throw std::invalid_argument("ray_decisions: grid must start at 0");
  for (size_t t = 1; t < a_grid.size(); ++t)
    if (!(a_grid[t] > a_grid[t - 1]))
      throw std::invalid_argument("ray_decisions: grid must be strictly increasing");

  RayScan scan;
  std::vector<double> point(x.size());
  for (double a : a_grid) {
    for (size_t l = 0; l < x.size(); ++l) point[l] = x[l] + a * direction.g[l];
    if (direction.model == ModelKind::multinomial) {
      bool valid = true;
      for (double c : point)
        if (c < -1e-9) valid = false;
      if (!valid) {
        if (survey_clip) {
          scan.clipped = true;
          break;
        }
        throw std::invalid_argument("ray_decisions: a = " + std::to_string(a) +
                                    " drives a multinomial cell negative");
      }
    }
    const DecisionReport report = procedure(point);
    scan.grid.push_back(a);
    scan.reject.push_back(report.rejected(direction.i, direction.j));
  }
  return scan;
}

std::optional<size_t> check_one_sided(const std::vector<bool>& reject) {
  for (size_t t = 1; t < reject.size(); ++t)
    if (reject[t - 1] && !reject[t]) return t;
  return std::nullopt;
}

std::optional<size_t> check_two_sided(const std::vector<bool>& reject) {
  bool seen_accept = false;
  bool reject_after_accept = false;
  for (size_t t = 0; t < reject.size(); ++t) {
    if (!reject[t]) {
      if (reject_after_accept) return t;
      seen_accept = true;
    } else if (seen_accept) {
      reject_after_accept = true;
    }
  }
  return std::nullopt;
}

bool figure2_applies_all_pairwise(const CriticalValues& criticals) {
  if (criticals.size() < 3)
    throw std::invalid_argument("figure2_applies_all_pairwise: needs three critical values");
  return criticals.values[0] + 2.0 * criticals.values[1] > 2.0 * criticals.values[2];
}

Counterexample counterexample_change_point() {
  Counterexample c;
  c.name = "figure1";
  c.family = {ProblemShape::change_point, 3, -1};
  c.sided = Sidedness::one_sided;
  c.pair_stat = PairStatKind::difference;
  c.criticals.values = {1.0, 2.0};
  c.criticals.source = "user";
  // T_12 = C_1 + eps, T_23 = C_2 + eps with eps = 0.05; moving 0.2 along
  // g_12 = (-1, 1, 0) raises T_12 to 1.45 but drops T_23 to 1.85, so the
  // step-down stops at stage 1 and the H_12 rejection is lost.
  c.x = {0.0, 1.05, 3.10};
  c.ray_pair = {0, 1};
  c.grid = {0.0, 0.2};
  c.expected_rejects = {{true, true}, {false, false}};  // pairs (1,2), (2,3)
  return c;
}

Counterexample counterexample_tvc() {
  Counterexample c;
  c.name = "figure2";
  c.family = {ProblemShape::treatments_vs_control, 3, 2};
  c.sided = Sidedness::two_sided;
  c.pair_stat = PairStatKind::difference;
  c.criticals.values = {1.0, 2.0};
  c.criticals.source = "user";
  // T_23(x) = C_2 + (C_1 + eps)/2 + eps with eps = 0.1. Along
  // g_13 = (-1, 0, 1): at a = 0.55 both hypotheses are rejected, at
  // a = 0.75 both are accepted again.
  c.x = {0.0, 2.65, 0.0};
  c.ray_pair = {0, 2};
  c.grid = {0.0, 0.55, 0.75};
  c.expected_rejects = {{false, true}, {true, true}, {false, false}};  // pairs (1,3), (2,3)
  return c;
}

namespace {

struct Instance {
  int k = 0, q = 1;
  int rank_n = 1;
  std::vector<double> data;
  CriticalValues criticals;
};

Instance random_instance(const CertifySetup& setup, std::mt19937_64& eng) {
  Instance inst;
  inst.k = setup.min_k + static_cast<int>(eng() % static_cast<std::uint64_t>(
                                                      setup.max_k - setup.min_k + 1));
  switch (setup.model) {
    case ModelKind::multinomial: {
      inst.q = 3 + static_cast<int>(eng() % 2);
      inst.data.resize(static_cast<size_t>(inst.k) * inst.q);
      for (int i = 0; i < inst.k; ++i)
        for (int l = 0; l < inst.q; ++l) {
          double c = static_cast<double>(eng() % 26);
          if (l == 0 || l == inst.q - 1) c += 3.0;  // room for whole-count ray moves
          inst.data[static_cast<size_t>(i) * inst.q + l] = c;
        }
      break;
    }
    case ModelKind::normal: {
      const bool multivariate =
          setup.sided == Sidedness::two_sided && (eng() & 1u) != 0;
      inst.q = multivariate ? 3 : 1;
      inst.data.resize(static_cast<size_t>(inst.k) * inst.q);
      for (double& v : inst.data) v = 6.0 * detail::uniform_closed0(eng) - 3.0;
      break;
    }
    case ModelKind::rank: {
      inst.rank_n = 2 + static_cast<int>(eng() % 2);
      const int total = inst.k * inst.rank_n;
      std::vector<std::pair<double, int>> draws(static_cast<size_t>(total));
      for (int t = 0; t < total; ++t)
        draws[static_cast<size_t>(t)] = {detail::uniform_closed0(eng), t / inst.rank_n};
      std::sort(draws.begin(), draws.end());
      std::vector<double> mean_rank(static_cast<size_t>(inst.k), 0.0);
      for (int r = 0; r < total; ++r)
        mean_rank[static_cast<size_t>(draws[static_cast<size_t>(r)].second)] +=
            static_cast<double>(r + 1) / inst.rank_n;
      inst.data = mean_rank;
      inst.q = 1;
      break;
    }
  }
  static constexpr double kAlphas[] = {0.05, 0.1, 0.2};
  inst.criticals = critical_values_bg(inst.k - 1, kAlphas[eng() % 3]);
  return inst;
}

std::vector<double> ray_grid(const CertifySetup& setup, const Instance& inst, int i, int j) {
  if (setup.model == ModelKind::multinomial) {
    const double room = std::min(inst.data[static_cast<size_t>(i) * inst.q + (inst.q - 1)],
                                 inst.data[static_cast<size_t>(j) * inst.q]);
    const int steps = std::min(5, static_cast<int>(room));
    std::vector<double> grid;
    for (int t = 0; t <= steps; ++t) grid.push_back(static_cast<double>(t));
    return grid;
  }
  return {0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
}

}  // namespace

CertifyResult certify_random_instances(const CertifySetup& setup, bool parallel) {
  if (setup.instances < 1) throw std::invalid_argument("certify: instances must be >= 1");
  if (setup.min_k < 2 || setup.max_k < setup.min_k)
    throw std::invalid_argument("certify: bad k range");
  if (setup.shape == ProblemShape::all_pairwise && setup.sided == Sidedness::one_sided)
    throw std::invalid_argument("one-sided alternatives are not defined for all-pairwise families");

  const int n = setup.instances;
  std::vector<long> scans(static_cast<size_t>(n), 0);
  std::vector<long> violations(static_cast<size_t>(n), 0);
  std::vector<std::optional<ViolationCase>> first_violation(static_cast<size_t>(n));

  auto run_instance = [&](int idx) {
    std::mt19937_64 eng(detail::substream_seed(setup.seed, static_cast<std::uint64_t>(idx)));
    const Instance inst = random_instance(setup, eng);
    ProblemFamily family{setup.shape, inst.k, -1};

    ProcedureSpec spec;
    spec.kind = ProcedureSpec::Kind::rsd;
    spec.model = setup.model;
    spec.family = family;
    spec.sided = setup.sided;
    spec.criticals = inst.criticals;
    spec.q = inst.q;
    spec.rank_n_per_pop = inst.rank_n;
    const DecisionProcedure procedure = make_procedure(spec);

    for (auto [i, j] : family.pairs()) {
      const DirectionVector dir = direction_vector(setup.model, inst.k, inst.q, i, j);
      const std::vector<double> grid = ray_grid(setup, inst, i, j);
      const RayScan scan = ray_decisions(procedure, inst.data, dir, grid, false);
      ++scans[static_cast<size_t>(idx)];
      const auto bad = setup.sided == Sidedness::one_sided ? check_one_sided(scan.reject)
                                                           : check_two_sided(scan.reject);
      if (bad) {
        ++violations[static_cast<size_t>(idx)];
        if (!first_violation[static_cast<size_t>(idx)]) {
          ViolationCase v;
          v.instance_index = idx;
          v.k = inst.k;
          v.q = inst.q;
          v.data = inst.data;
          v.pair = {i, j};
          v.grid = scan.grid;
          v.pattern = scan.reject;
          v.violation_index = *bad;
          v.sided = setup.sided;
          first_violation[static_cast<size_t>(idx)] = std::move(v);
        }
      }
    }
  };

#ifdef _OPENMP
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (int idx = 0; idx < n; ++idx) run_instance(idx);
  } else
#endif
  {
    (void)parallel;
    for (int idx = 0; idx < n; ++idx) run_instance(idx);
  }

  CertifyResult result;
  result.instances = n;
  for (int idx = 0; idx < n; ++idx) {
    result.scans += scans[static_cast<size_t>(idx)];
    result.violations += violations[static_cast<size_t>(idx)];
    if (first_violation[static_cast<size_t>(idx)] && result.examples.size() < 3)
      result.examples.push_back(*first_violation[static_cast<size_t>(idx)]);
  }
  return result;
}

}  // namespace rsd
