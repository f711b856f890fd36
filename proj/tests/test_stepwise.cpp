#include "rsd/stepwise.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "rsd/statistics.hpp"
#include "test_data.hpp"

using namespace rsd;

namespace {

CriticalValues user_criticals(std::vector<double> values) {
  CriticalValues cv;
  cv.values = std::move(values);
  return cv;
}

StatisticTable change_point_stats(std::vector<double> values) {
  StatisticTable t;
  t.sided = Sidedness::one_sided;
  for (size_t i = 0; i + 1 <= values.size(); ++i) t.pairs.emplace_back(static_cast<int>(i),
                                                                       static_cast<int>(i) + 1);
  t.values = std::move(values);
  return t;
}

}  // namespace

TEST_CASE("step-down walks the health-status statistics") {
  const CriticalValues cv = user_criticals({1.645, 1.96});
  {
    const StatisticTable stats = change_point_stats({1.653, 2.006});
    const DecisionReport r = step_down(stats, cv);
    CHECK(r.rejected(1, 2));
    CHECK(r.find(1, 2)->stage == 1);
    CHECK(r.rejected(0, 1));
    CHECK(r.find(0, 1)->stage == 2);
  }
  {
    // At the shifted sample point the largest statistic fails at step 1.
    const StatisticTable stats = change_point_stats({1.954, 1.865});
    const DecisionReport r = step_down(stats, cv);
    CHECK(r.reject_count() == 0);
  }
  {
    const StatisticTable stats = change_point_stats({0.3, 1.2});
    CHECK(step_down(stats, user_criticals({1.3, 1.9})).reject_count() == 0);
  }
}

TEST_CASE("step procedures validate lengths") {
  const StatisticTable stats = change_point_stats({1.0, 2.0});
  CHECK_THROWS_AS(step_down(stats, user_criticals({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(step_up(stats, user_criticals({1.0, 2.0, 3.0})), std::invalid_argument);
}

TEST_CASE("step-up ordered comparisons") {
  const CriticalValues cv = user_criticals({1.96, 2.13, 2.39});
  {
    const StatisticTable stats = change_point_stats({0.2, 0.4, 0.1});
    CHECK(step_up(stats, cv).reject_count() == 0);
  }
  {
    // Sorted statistics (1.0, 2.2, 2.5): the scan from the least significant
    // first fails at T_(2) = 2.2 > 2.13, rejecting the two larger statistics.
    const StatisticTable stats = change_point_stats({2.5, 1.0, 2.2});
    const DecisionReport r = step_up(stats, cv);
    CHECK(r.reject_count() == 2);
    CHECK(r.rejected(0, 1));
    CHECK_FALSE(r.rejected(1, 2));
    CHECK(r.rejected(2, 3));
  }
  {
    const StatisticTable stats = change_point_stats({2.0, 0.5, 0.6});
    CHECK(step_up(stats, cv).reject_count() == 0);
  }
  {
    // Once the least significant statistic violates, everything goes.
    const StatisticTable stats = change_point_stats({2.0, 2.2, 2.3});
    CHECK(step_up(stats, cv).reject_count() == 3);
    CHECK(step_down(stats, cv).reject_count() == 0);
  }
}

TEST_CASE("step-down rejects a prefix of the significance order, monotonically in C") {
  std::mt19937 eng(41);
  std::uniform_real_distribution<double> val(0.0, 4.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int K = 2 + static_cast<int>(eng() % 6);
    std::vector<double> values(static_cast<size_t>(K));
    for (double& v : values) v = val(eng);
    std::vector<double> cvals(static_cast<size_t>(K));
    for (double& c : cvals) c = val(eng);
    std::sort(cvals.begin(), cvals.end());
    for (int m = 1; m < K; ++m)
      if (cvals[size_t(m)] <= cvals[size_t(m - 1)]) cvals[size_t(m)] = cvals[size_t(m - 1)] + 1e-3;

    const StatisticTable stats = change_point_stats(values);
    const CriticalValues cv = user_criticals(cvals);
    const DecisionReport r = step_down(stats, cv);

    // Prefix property: anything larger than a rejected statistic is rejected.
    for (const Decision& d : r.decisions)
      if (d.reject)
        for (const Decision& e : r.decisions)
          if (e.statistic > d.statistic) CHECK(e.reject);

    // Lowering every constant keeps all rejections.
    std::vector<double> lower(cvals);
    for (double& c : lower) c -= 0.5;
    const DecisionReport r2 = step_down(stats, user_criticals(lower));
    for (size_t i = 0; i < r.decisions.size(); ++i)
      if (r.decisions[i].reject) CHECK(r2.decisions[i].reject);

    // Step-up rejects at least as much as step-down.
    const DecisionReport su = step_up(stats, cv);
    CHECK(su.reject_count() >= r.reject_count());
    for (size_t i = 0; i < r.decisions.size(); ++i)
      if (r.decisions[i].reject) CHECK(su.decisions[i].reject);
  }
}

TEST_CASE("step procedures ignore storage order") {
  const CriticalValues cv = user_criticals({1.0, 1.5, 2.0});
  StatisticTable stats;
  stats.pairs = {{0, 1}, {1, 2}, {2, 3}};
  stats.values = {2.1, 0.4, 1.7};
  StatisticTable shuffled;
  shuffled.pairs = {{2, 3}, {0, 1}, {1, 2}};
  shuffled.values = {1.7, 2.1, 0.4};
  for (auto* proc : {&step_down, &step_up}) {
    const DecisionReport a = (*proc)(stats, cv);
    const DecisionReport b = (*proc)(shuffled, cv);
    for (auto [i, j] : stats.pairs) CHECK(a.rejected(i, j) == b.rejected(i, j));
  }
}

TEST_CASE("pairwise stats fills the family from the data") {
  const ProblemFamily cp{ProblemShape::change_point, 3, -1};
  const StatisticTable wmw = pairwise_stats(testdata::health_table_x(), cp, Sidedness::one_sided);
  REQUIRE(wmw.values.size() == 2);
  CHECK(wmw.values[0] == testdata::Near{1.653, 0.001});
  CHECK(wmw.values[1] == testdata::Near{2.006, 0.001});

  ContingencyTable identical;
  identical.counts = {{5, 7, 9}, {5, 7, 9}, {5, 7, 9}};
  for (double v : pairwise_stats(identical, cp, Sidedness::one_sided).values) CHECK(v == 0.0);

  const ProblemFamily tvc{ProblemShape::treatments_vs_control, 4, 3};
  const StatisticTable zd = pairwise_stats(testdata::normal_tvc_example(), tvc,
                                           PairStatKind::z_difference, Sidedness::one_sided);
  REQUIRE(zd.values.size() == 3);
  CHECK(zd.values[0] == testdata::Near{0.71, 0.005});  // (1 - 0) / sqrt(2)
  CHECK(zd.values[1] == testdata::Near{4.0 / std::sqrt(2.0), 1e-12});
  CHECK(zd.values[2] == testdata::Near{-2.0 / std::sqrt(2.0), 1e-12});

  const StatisticTable diff = pairwise_stats(testdata::normal_tvc_example(), tvc,
                                             PairStatKind::difference, Sidedness::two_sided);
  CHECK(diff.values[0] == doctest::Approx(1.0));
  CHECK(diff.values[2] == doctest::Approx(2.0));

  SampleMatrix ranks;
  ranks.kind = SampleMatrix::Kind::rank_means;
  ranks.values = {{1.5}, {3.5}};
  const ProblemFamily pair2{ProblemShape::change_point, 2, -1};
  const StatisticTable rz =
      pairwise_stats(ranks, pair2, PairStatKind::rank_z, Sidedness::one_sided, 2);
  CHECK(rz.values[0] == testdata::Near{2.191, 0.001});
}

TEST_CASE("pairwise stats rejects unsupported combinations") {
  const ProblemFamily ap{ProblemShape::all_pairwise, 3, -1};
  SampleMatrix m;
  m.values = {{1.0}, {2.0}, {3.0}};
  CHECK_THROWS_AS(pairwise_stats(m, ap, PairStatKind::z_difference, Sidedness::one_sided),
                  std::invalid_argument);
  CHECK_THROWS_AS(pairwise_stats(m, ap, PairStatKind::chisq, Sidedness::one_sided),
                  std::invalid_argument);
  CHECK_THROWS_AS(pairwise_stats(m, ap, PairStatKind::wmw, Sidedness::two_sided),
                  std::invalid_argument);
}
