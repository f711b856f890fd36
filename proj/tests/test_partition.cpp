#include "rsd/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rsd/statistics.hpp"
#include "test_data.hpp"

using namespace rsd;

namespace {

CriticalValues user_criticals(std::vector<double> values) {
  CriticalValues cv;
  cv.values = std::move(values);
  return cv;
}

std::vector<double> flat_normal(std::initializer_list<double> xs) { return std::vector<double>(xs); }

DispersionResult dispersion_oracle(const std::vector<int>& block, const ProblemFamily& family,
                                   const PooledModel& model) {
  const DispersionResult best = oracles::dispersion(block, family, model);
  REQUIRE(!best.a_b.empty());
  return best;
}

}  // namespace

TEST_CASE("pool averages multinomial rows and means normal rows") {
  const auto table = testdata::health_table_x();
  const std::vector<int> first_two = {0, 1};
  const PooledSummary avg = pool(first_two, table);
  CHECK(avg.n_pops == 2);
  CHECK(avg.values == std::vector<double>{9.5, 226.0, 9.5});
  const std::vector<int> single = {2};
  CHECK(pool(single, table).values == table.counts[2]);
  const PooledSummary raw = pool(first_two, table, true);
  CHECK(raw.values == std::vector<double>{19.0, 452.0, 19.0});

  const auto normal = testdata::normal_tvc_example();
  const std::vector<int> rest = {1, 2, 3};
  const PooledSummary mean = pool(rest, normal);
  CHECK(mean.values[0] == doctest::Approx((4.0 - 2.0 + 0.0) / 3.0));

  SampleMatrix ranks;
  ranks.kind = SampleMatrix::Kind::rank_means;
  ranks.values = {{1.5}, {3.5}};
  const std::vector<int> a = {0};
  const PooledSummary rp = pool(a, ranks, 2);
  CHECK(rp.weight == 2.0);
  CHECK(rp.values[0] == doctest::Approx(3.0));  // total rank sum

  const std::vector<int> empty;
  CHECK_THROWS_AS(pool(empty, table), std::invalid_argument);
}

TEST_CASE("dispersion max walks the four-population example") {
  const ProblemFamily family{ProblemShape::treatments_vs_control, 4, 3};
  NormalMeanModel model(flat_normal({1, 4, -2, 0}), 4, 1, Sidedness::two_sided);

  std::vector<SplitCandidate> record;
  const std::vector<int> all = {0, 1, 2, 3};
  const DispersionResult step1 = dispersion_max(all, family, model, &record);
  REQUIRE(record.size() == 3);
  CHECK(record[0].h == testdata::Near{0.29, 0.005});
  CHECK(record[1].h == testdata::Near{3.75, 0.005});
  CHECK(record[2].h == testdata::Near{3.18, 0.005});
  CHECK(step1.a_b == std::vector<int>{1});
  CHECK(step1.rest == std::vector<int>{0, 2, 3});
  CHECK(step1.d == testdata::Near{3.75, 0.005});

  record.clear();
  const std::vector<int> remaining = {0, 2, 3};
  const DispersionResult step2 = dispersion_max(remaining, family, model, &record);
  REQUIRE(record.size() == 2);
  CHECK(record[0].h == testdata::Near{1.63, 0.005});
  CHECK(record[1].h == testdata::Near{2.04, 0.005});
  CHECK(step2.a_b == std::vector<int>{2});
  CHECK(step2.d == testdata::Near{2.04, 0.005});
}

TEST_CASE("dispersion max is zero with deterministic ties on constant data") {
  NormalMeanModel model({2.0, 2.0, 2.0, 2.0}, 4, 1, Sidedness::two_sided);
  const std::vector<int> all = {0, 1, 2, 3};

  const ProblemFamily tvc{ProblemShape::treatments_vs_control, 4, 3};
  const DispersionResult r1 = dispersion_max(all, tvc, model);
  CHECK(std::fabs(r1.d) <= 1e-12);
  CHECK(r1.a_b == std::vector<int>{0});

  const ProblemFamily cp{ProblemShape::change_point, 4, -1};
  const DispersionResult r2 = dispersion_max(all, cp, model);
  CHECK(std::fabs(r2.d) <= 1e-12);
  CHECK(r2.a_b == std::vector<int>{0});

  const ProblemFamily ap{ProblemShape::all_pairwise, 4, -1};
  const DispersionResult r3 = dispersion_max(all, ap, model);
  CHECK(std::fabs(r3.d) <= 1e-12);
  CHECK(r3.a_b == std::vector<int>{0});
}

TEST_CASE("dispersion max rejects blocks outside Omega") {
  NormalMeanModel model({1.0, 2.0, 3.0, 4.0}, 4, 1, Sidedness::two_sided);
  const ProblemFamily cp{ProblemShape::change_point, 4, -1};
  const std::vector<int> gap = {0, 2};
  CHECK_THROWS_AS(dispersion_max(gap, cp, model), std::invalid_argument);
  const ProblemFamily tvc{ProblemShape::treatments_vs_control, 4, 3};
  const std::vector<int> no_control = {0, 1};
  CHECK_THROWS_AS(dispersion_max(no_control, tvc, model), std::invalid_argument);
  const std::vector<int> singleton = {1};
  const ProblemFamily ap{ProblemShape::all_pairwise, 4, -1};
  CHECK_THROWS_AS(dispersion_max(singleton, ap, model), std::invalid_argument);
}

TEST_CASE("all-pairwise block size cap") {
  const int k = kAllPairwiseBlockCap + 1;
  std::vector<double> data(static_cast<size_t>(k));
  std::iota(data.begin(), data.end(), 0.0);
  NormalMeanModel model(data, k, 1, Sidedness::two_sided);
  const ProblemFamily ap{ProblemShape::all_pairwise, k, -1};
  std::vector<int> block(static_cast<size_t>(k));
  std::iota(block.begin(), block.end(), 0);
  CHECK_THROWS_AS(dispersion_max(block, ap, model), std::invalid_argument);
}

TEST_CASE("dispersion max equals brute-force enumeration on random instances") {
  std::mt19937 eng(2024);
  std::uniform_real_distribution<double> val(-3.0, 3.0);
  std::uniform_real_distribution<double> cell(0.5, 25.0);
  int instances = 0;
  while (instances < 120) {
    const int k = 3 + static_cast<int>(eng() % 3);
    const int pick = static_cast<int>(eng() % 3);
    const ProblemFamily family{pick == 0   ? ProblemShape::change_point
                               : pick == 1 ? ProblemShape::treatments_vs_control
                                           : ProblemShape::all_pairwise,
                               k, k - 1};
    std::unique_ptr<PooledModel> model;
    const int which = static_cast<int>(eng() % 3);
    const Sidedness sided = family.shape == ProblemShape::change_point && (eng() & 1u)
                                ? Sidedness::one_sided
                                : Sidedness::two_sided;
    if (which == 0) {
      std::vector<double> data(static_cast<size_t>(k));
      for (double& v : data) v = val(eng);
      model = std::make_unique<NormalMeanModel>(std::move(data), k, 1, sided);
    } else if (which == 1) {
      std::vector<double> data(static_cast<size_t>(k) * 3);
      for (double& v : data) v = cell(eng);
      model = std::make_unique<MultinomialWmwModel>(std::move(data), k, 3, sided);
    } else {
      std::vector<double> means(static_cast<size_t>(k));
      for (double& v : means) v = 1.0 + 9.0 * std::generate_canonical<double, 53>(eng);
      model = std::make_unique<JointRankModel>(std::move(means), k, 2, sided);
    }
    std::vector<int> block(static_cast<size_t>(k));
    std::iota(block.begin(), block.end(), 0);

    const DispersionResult fast = dispersion_max(block, family, *model);
    const DispersionResult slow = dispersion_oracle(block, family, *model);
    CHECK(fast.d == testdata::Near{slow.d, 1e-9});
    // Two-sided all-pairwise statistics are orientation-symmetric, so the
    // maximizing split is an unordered pair there.
    CHECK(oracles::same_split(fast, slow, family.shape == ProblemShape::all_pairwise));
    ++instances;
  }
}

TEST_CASE("rsd run reproduces the four-population trace") {
  const ProblemFamily family{ProblemShape::treatments_vs_control, 4, 3};
  NormalMeanModel model(flat_normal({1, 4, -2, 0}), 4, 1, Sidedness::two_sided);
  const CriticalValues cv = user_criticals({1.48, 1.97, 2.40});

  RsdOptions opts;
  opts.record_candidates = true;
  const RsdResult result = rsd_run(model, family, cv, opts);

  REQUIRE(result.trace.steps.size() == 2);
  CHECK(result.trace.steps[0].stage == 1);
  CHECK(result.trace.steps[0].split_a == std::vector<int>{1});
  CHECK(result.trace.steps[0].h == testdata::Near{3.75, 0.005});
  CHECK(result.trace.steps[0].threshold == doctest::Approx(2.40));
  CHECK(result.trace.steps[1].split_a == std::vector<int>{2});
  CHECK(result.trace.steps[1].h == testdata::Near{2.04, 0.005});
  CHECK(result.trace.steps[1].threshold == doctest::Approx(1.97));

  REQUIRE(result.trace.final_blocks.size() == 3);
  CHECK(result.trace.final_blocks[0] == std::vector<int>{0, 3});
  CHECK(result.trace.final_blocks[1] == std::vector<int>{1});
  CHECK(result.trace.final_blocks[2] == std::vector<int>{2});

  CHECK_FALSE(result.report.rejected(0, 3));
  CHECK(result.report.rejected(1, 3));
  CHECK(result.report.rejected(2, 3));
  CHECK(result.report.find(1, 3)->stage == 1);
  CHECK(result.report.find(2, 3)->stage == 2);

  REQUIRE(result.trace.stage_details.size() == 3);
  REQUIRE(result.trace.stage_details[0].candidates.size() == 3);
  CHECK(result.trace.stage_details[0].candidates[0].h == testdata::Near{0.29, 0.005});
  CHECK(result.trace.stage_details[0].candidates[1].h == testdata::Near{3.75, 0.005});
  CHECK(result.trace.stage_details[0].candidates[2].h == testdata::Near{3.18, 0.005});
  REQUIRE(result.trace.stage_details[2].candidates.size() == 1);
  CHECK(result.trace.stage_details[2].candidates[0].h == testdata::Near{0.71, 0.005});
  CHECK_FALSE(result.trace.stage_details[2].split_executed);
}

TEST_CASE("rsd run on the health-status change point splits both stages") {
  const ProblemFamily family{ProblemShape::change_point, 3, -1};
  const CriticalValues cv = user_criticals({1.645, 1.96});

  {
    MultinomialWmwModel model(testdata::health_table_x().flat(), 3, 3, Sidedness::one_sided);
    const RsdResult result = rsd_run(model, family, cv);
    REQUIRE(result.trace.steps.size() == 2);
    CHECK(result.trace.steps[0].split_a == std::vector<int>{0, 1});
    CHECK(result.trace.steps[0].h == testdata::Near{2.78, 0.005});
    CHECK(result.trace.steps[1].split_a == std::vector<int>{0});
    CHECK(result.trace.steps[1].h == testdata::Near{1.653, 0.001});
    CHECK(result.report.rejected(0, 1));
    CHECK(result.report.rejected(1, 2));
  }
  {
    MultinomialWmwModel model(testdata::health_table_xstar().flat(), 3, 3, Sidedness::one_sided);
    const RsdResult result = rsd_run(model, family, cv);
    // The largest first-stage statistic is now row 1 against pooled rows
    // 2+3 (2.824), then rows 2 vs 3 split at 1.865.
    REQUIRE(result.trace.steps.size() == 2);
    CHECK(result.trace.steps[0].h == testdata::Near{2.824, 0.001});
    CHECK(result.trace.steps[1].h == testdata::Near{1.865, 0.001});
    CHECK(result.report.rejected(0, 1));
    CHECK(result.report.rejected(1, 2));
  }
}

TEST_CASE("rsd run accepts everything on constant data") {
  const ProblemFamily family{ProblemShape::change_point, 5, -1};
  MultinomialWmwModel model(std::vector<double>(15, 10.0), 5, 3, Sidedness::one_sided);
  const RsdResult result = rsd_run(model, family, user_criticals({1.0, 1.5, 2.0, 2.5}));
  CHECK(result.trace.steps.empty());
  REQUIRE(result.trace.final_blocks.size() == 1);
  CHECK(result.report.reject_count() == 0);
}

TEST_CASE("rsd run validates the critical value count up front") {
  const ProblemFamily family{ProblemShape::treatments_vs_control, 4, 3};
  NormalMeanModel model(flat_normal({1, 4, -2, 0}), 4, 1, Sidedness::two_sided);
  CHECK_THROWS_AS(rsd_run(model, family, user_criticals({1.48, 1.97})), std::invalid_argument);
}

TEST_CASE("rsd traces refine one block per step and respect thresholds") {
  std::mt19937 eng(99);
  std::uniform_real_distribution<double> val(-2.5, 2.5);
  for (int rep = 0; rep < 60; ++rep) {
    const int k = 4 + static_cast<int>(eng() % 3);
    const int pick = static_cast<int>(eng() % 3);
    const ProblemFamily family{pick == 0   ? ProblemShape::change_point
                               : pick == 1 ? ProblemShape::treatments_vs_control
                                           : ProblemShape::all_pairwise,
                               k, k - 1};
    std::vector<double> data(static_cast<size_t>(k));
    for (double& v : data) v = val(eng);
    NormalMeanModel model(data, k, 1, Sidedness::two_sided);
    const CriticalValues cv = critical_values_bg(k - 1, 0.2);
    const RsdResult result = rsd_run(model, family, cv);

    size_t expected_blocks = 1;
    for (const TraceStep& step : result.trace.steps) {
      CHECK(step.h > step.threshold);
      CHECK(step.split_a.size() + step.split_rest.size() == step.block.size());
      CHECK(!step.split_a.empty());
      CHECK(!step.split_rest.empty());
      ++expected_blocks;
    }
    CHECK(result.trace.final_blocks.size() == expected_blocks);

    // Upon stopping, no eligible block's dispersion exceeds the stopping
    // threshold.
    const int stop_stage = static_cast<int>(result.trace.steps.size()) + 1;
    if (stop_stage <= cv.size()) {
      const double stop_threshold = cv.values[static_cast<size_t>(cv.size() - stop_stage)];
      for (const auto& block : result.trace.final_blocks) {
        if (!block_eligible(family, block)) continue;
        CHECK(dispersion_max(block, family, model).d <= stop_threshold);
      }
    }
  }
}

TEST_CASE("all-pairwise rsd is equivariant under population relabeling") {
  std::mt19937 eng(512);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  const ProblemFamily family{ProblemShape::all_pairwise, 5, -1};
  const CriticalValues cv = critical_values_bg(4, 0.2);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> data(5);
    for (double& v : data) v = val(eng);
    std::vector<int> perm = {0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), eng);
    std::vector<double> permuted(5);
    for (int i = 0; i < 5; ++i) permuted[static_cast<size_t>(perm[static_cast<size_t>(i)])] =
        data[static_cast<size_t>(i)];

    NormalMeanModel base(data, 5, 1, Sidedness::two_sided);
    NormalMeanModel relabeled(permuted, 5, 1, Sidedness::two_sided);
    const auto blocks_base = rsd_run(base, family, cv).trace.final_blocks;
    const auto blocks_perm = rsd_run(relabeled, family, cv).trace.final_blocks;

    auto canonical = [](std::vector<std::vector<int>> blocks) {
      for (auto& b : blocks) std::sort(b.begin(), b.end());
      std::sort(blocks.begin(), blocks.end());
      return blocks;
    };
    std::vector<std::vector<int>> mapped;
    for (const auto& b : blocks_base) {
      std::vector<int> nb;
      for (int member : b) nb.push_back(perm[static_cast<size_t>(member)]);
      mapped.push_back(std::move(nb));
    }
    CHECK(canonical(mapped) == canonical(blocks_perm));
  }
}

TEST_CASE("decisions from partition") {
  const ProblemFamily family{ProblemShape::treatments_vs_control, 4, 3};
  const DecisionReport r = decisions_from_partition({{0, 3}, {1}, {2}}, family);
  CHECK_FALSE(r.rejected(0, 3));
  CHECK(r.rejected(1, 3));
  CHECK(r.rejected(2, 3));

  const DecisionReport all_accept = decisions_from_partition({{0, 1, 2, 3}}, family);
  CHECK(all_accept.reject_count() == 0);
  const DecisionReport all_reject = decisions_from_partition({{0}, {1}, {2}, {3}}, family);
  CHECK(all_reject.reject_count() == 3);

  CHECK_THROWS_AS(decisions_from_partition({{0, 1}, {1, 2, 3}}, family), std::invalid_argument);
  CHECK_THROWS_AS(decisions_from_partition({{0, 1}}, family), std::invalid_argument);
}

TEST_CASE("all-pairwise splitting requires a two-sided statistic") {
  NormalMeanModel model({1.0, 2.0, 3.0}, 3, 1, Sidedness::one_sided);
  const ProblemFamily ap{ProblemShape::all_pairwise, 3, -1};
  const std::vector<int> block = {0, 1, 2};
  CHECK_THROWS_AS(dispersion_max(block, ap, model), std::invalid_argument);
}

TEST_CASE("extra critical values shift stage thresholds from the top of the list") {
  // Stage m consumes C_{K+1-m} with K the list length, so prepending smaller
  // values below the used range changes nothing.
  const ProblemFamily family{ProblemShape::treatments_vs_control, 4, 3};
  NormalMeanModel model(flat_normal({1, 4, -2, 0}), 4, 1, Sidedness::two_sided);
  const RsdResult base = rsd_run(model, family, user_criticals({1.48, 1.97, 2.40}));
  const RsdResult padded = rsd_run(model, family, user_criticals({0.5, 1.0, 1.48, 1.97, 2.40}));
  CHECK(base.trace.final_blocks == padded.trace.final_blocks);
  REQUIRE(base.trace.steps.size() == padded.trace.steps.size());
  for (size_t s = 0; s < base.trace.steps.size(); ++s)
    CHECK(base.trace.steps[s].threshold == padded.trace.steps[s].threshold);
}

TEST_CASE("raw-sum pooling is available behind the default averaging") {
  const auto table = testdata::health_table_x();
  MultinomialWmwModel averaged(table.flat(), 3, 3, Sidedness::one_sided);
  MultinomialWmwModel raw(table.flat(), 3, 3, Sidedness::one_sided, true);
  const std::vector<int> left = {0, 1}, right = {2};
  const Pool pl = averaged.make_pool(left), pr = averaged.make_pool(right);

  const std::vector<double> avg_row = {9.5, 226, 9.5};
  const std::vector<double> sum_row = {19, 452, 19};
  CHECK(averaged.h(pl, pr) ==
        testdata::Near{wmw_midrank_z(avg_row, table.counts[2]), 1e-12});
  CHECK(raw.h(pl, pr) == testdata::Near{wmw_midrank_z(sum_row, table.counts[2]), 1e-12});
}

TEST_CASE("multivariate rsd uses the pooled quadratic form") {
  // Two q=2 populations: H = |x1 - x2|^2 / (1/1 + 1/1).
  const ProblemFamily family{ProblemShape::treatments_vs_control, 2, 1};
  NormalMeanModel model({3.0, 0.0, 0.0, 4.0}, 2, 2, Sidedness::two_sided);
  const std::vector<int> block = {0, 1};
  const DispersionResult d = dispersion_max(block, family, model);
  CHECK(d.d == testdata::Near{(9.0 + 16.0) / 2.0, 1e-12});
  const RsdResult below = rsd_run(model, family, user_criticals({12.4}));
  CHECK(below.report.rejected(0, 1));
  // Equality with the threshold stops the split (strict comparison).
  const RsdResult at = rsd_run(model, family, user_criticals({12.5}));
  CHECK_FALSE(at.report.rejected(0, 1));
  const RsdResult above = rsd_run(model, family, user_criticals({13.0}));
  CHECK_FALSE(above.report.rejected(0, 1));
}
