// Copyright 2026 The fairrank Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fairrank/metrics.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "fairrank/error.h"
#include "fairrank/util.h"

namespace fairrank {
namespace {

Grouping TwoGroups(int n_users, int n_adv) {
  std::vector<char> flags(n_users, 0);
  for (int u = 0; u < n_adv; ++u) flags[u] = 1;
  return Grouping::FromFlags(flags, GroupingMethod::kActivity, {});
}

double NdcgOracle(const std::vector<int>& list, const ItemSet& rel, int k) {
  if (rel.empty()) return 0.0;
  double dcg = 0.0, idcg = 0.0;
  for (int p = 1; p <= k; ++p) {
    if (p <= static_cast<int>(list.size()) && rel.count(list[p - 1])) {
      dcg += 1.0 / std::log2(p + 1.0);
    }
    if (p <= static_cast<int>(rel.size())) idcg += 1.0 / std::log2(p + 1.0);
  }
  return dcg / idcg;
}

TEST(NdcgTest, HandValues) {
  const std::vector<int> list = {1, 2, 3};
  EXPECT_DOUBLE_EQ(NdcgAtK(list, {1, 2}, 2), 1.0);
  EXPECT_NEAR(NdcgAtK(list, {2}, 2), 0.63093, 1e-5);
  EXPECT_EQ(NdcgAtK(list, {}, 2), 0.0);
  EXPECT_EQ(NdcgAtK(list, {9}, 3), 0.0);
}

TEST(NdcgTest, MatchesFormulaOnRandomLists) {
  Rng rng(12);
  for (int t = 0; t < 500; ++t) {
    std::vector<int> items(30);
    std::iota(items.begin(), items.end(), 0);
    Shuffle(items, rng);
    std::vector<int> list(items.begin(), items.begin() + 1 + UniformIndex(rng, 15));
    ItemSet rel;
    const int n_rel = UniformIndex(rng, 8);
    for (int j = 0; j < n_rel; ++j) rel.insert(UniformIndex(rng, 30));
    const int k = 1 + UniformIndex(rng, 12);
    const double v = NdcgAtK(list, rel, k);
    EXPECT_NEAR(v, NdcgOracle(list, rel, k), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

TEST(F1Test, HandValues) {
  std::vector<int> list(10);
  std::iota(list.begin(), list.end(), 0);
  ItemSet all(list.begin(), list.end());
  EXPECT_DOUBLE_EQ(F1AtK(list, all, 10), 1.0);
  EXPECT_NEAR(F1AtK(list, {3, 20, 21, 22}, 10), 0.142857, 1e-6);
  EXPECT_EQ(F1AtK(list, {50}, 10), 0.0);
}

TEST(UgfTest, SignedDifferenceOfMeans) {
  auto g = TwoGroups(4, 2);
  const std::vector<double> v = {0.0566, 0.0566, 0.0288, 0.0288};
  EXPECT_NEAR(Ugf(v, g), 0.0278, 1e-12);
  const std::vector<double> w = {0.0259, 0.0259, 0.0378, 0.0378};
  EXPECT_NEAR(Ugf(w, g), -0.0119, 1e-12);
  const std::vector<double> same(4, 0.3);
  EXPECT_EQ(Ugf(same, g), 0.0);
}

TEST(UgfTest, IncludeMaskAndEmptyGroup) {
  auto g = TwoGroups(4, 2);
  const std::vector<double> v = {1.0, 0.0, 0.5, 0.25};
  const std::vector<char> mask = {1, 0, 1, 1};
  EXPECT_NEAR(Ugf(v, g, mask), 1.0 - 0.375, 1e-15);
  const std::vector<char> none = {0, 0, 1, 1};
  try {
    Ugf(v, g, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateGrouping);
  }
  EXPECT_THROW(Grouping::FromFlags({1}, GroupingMethod::kActivity, {}), Error);
}

TEST(UgfImprovementTest, ReferenceValues) {
  EXPECT_NEAR(UgfImprovement(0.0278, 0.0077).percent, 72.3, 0.05);
  EXPECT_NEAR(UgfImprovement(0.0453, 0.0148).percent, 67.33, 0.005);
  EXPECT_EQ(UgfImprovement(-0.2, -0.2).percent, 0.0);
  EXPECT_NEAR(UgfImprovement(-0.02, 0.01).percent, 50.0, 1e-12);
  const auto undefined = UgfImprovement(0.0, 0.1);
  EXPECT_FALSE(undefined.defined);
  EXPECT_EQ(undefined.percent, 0.0);
}

TEST(GapTest, NestedMean) {
  PopularityTable pop;
  pop.counts = {4, 6, 2, 8, 1};
  pop.total_users = 10;
  RecLists lists = {{0, 1}, {2}, {3}, {}};
  EXPECT_DOUBLE_EQ(Gap(lists, pop, std::vector<int>{0}).value, 5.0);
  // Means 2 and 8 average to 5 regardless of list length.
  RecLists uneven = {{2, 2, 2, 2}, {3}};
  EXPECT_DOUBLE_EQ(Gap(uneven, pop, std::vector<int>{0, 1}).value, 5.0);
  RecLists same = {{0, 1}, {1, 0}, {0, 1}};
  EXPECT_DOUBLE_EQ(Gap(same, pop, std::vector<int>{0, 1, 2}).value, 5.0);
  auto r = Gap(lists, pop, std::vector<int>{0, 3});
  EXPECT_EQ(r.excluded, 1);
  EXPECT_DOUBLE_EQ(r.value, 5.0);
}

TEST(DeltaGapTest, Values) {
  EXPECT_EQ(*DeltaGap(5.0, 5.0), 0.0);
  EXPECT_EQ(*DeltaGap(10.0, 5.0), 1.0);
  EXPECT_EQ(*DeltaGap(2.5, 5.0), -0.5);
  EXPECT_FALSE(DeltaGap(1.0, 0.0).has_value());
}

TEST(NoveltyTest, Bits) {
  PopularityTable pop;
  pop.counts = {16, 8, 2, 2, 0};
  pop.total_users = 16;
  EXPECT_EQ(Novelty({{0}}, pop), 0.0);
  EXPECT_EQ(Novelty({{1}}, pop), 1.0);
  EXPECT_EQ(Novelty({{2}, {3}}, pop), 3.0);
  EXPECT_EQ(Novelty({{4}}, pop), 4.0);  // unseen item counts as 1
  EXPECT_EQ(Novelty({}, pop), 0.0);
}

TEST(CoverageTest, Values) {
  RecLists same(2677);
  for (auto& l : same) {
    l.resize(10);
    std::iota(l.begin(), l.end(), 0);
  }
  EXPECT_NEAR(Coverage(same, 2060), 0.49, 0.005);
  EXPECT_DOUBLE_EQ(Coverage({{0, 1}, {2}}, 3), 100.0);
  EXPECT_EQ(Coverage({}, 3), 0.0);
}

TEST(ExposureTest, Counts) {
  ItemPartition p;
  p.is_short_head = {1, 1, 0, 0, 0};
  RecLists heads(2677, std::vector<int>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  auto e = ExposureCounts(heads, p);
  EXPECT_EQ(e.short_slots, 26770);
  EXPECT_EQ(e.long_slots, 0);
  auto tail = ExposureCounts({{2, 3}, {4}}, p);
  EXPECT_EQ(tail.short_slots, 0);
  EXPECT_EQ(tail.long_slots, 3);
  Rng rng(30);
  RecLists random(6);
  int64_t short_count = 0;
  for (int s = 0; s < 30; ++s) {
    const int item = UniformIndex(rng, 5);
    random[s % 6].push_back(item);
    if (p.is_short_head[item]) ++short_count;
  }
  auto r = ExposureCounts(random, p);
  EXPECT_EQ(r.short_slots, short_count);
  EXPECT_EQ(r.long_slots, 30 - short_count);
}

TEST(PearsonTest, ExactLines) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y(5), z(5);
  for (int i = 0; i < 5; ++i) {
    y[i] = 2 * x[i] + 1;
    z[i] = -x[i];
  }
  EXPECT_NEAR(Pearson(x, y)->r, 1.0, 1e-15);
  EXPECT_NEAR(Pearson(x, z)->r, -1.0, 1e-15);
  EXPECT_EQ(Pearson(x, y)->p, 0.0);
}

TEST(PearsonTest, MatchesReferenceImplementation) {
  // r and two-sided p computed independently with scipy.stats.pearsonr.
  struct Case {
    std::vector<double> x, y;
    double r, p;
  };
  const Case cases[] = {
      {{1, 2, 3, 4, 5}, {2, 1, 4, 3, 6}, 0.8219949365267865, 0.08770664700806553},
      {{1, 2, 3, 4, 5, 6, 7}, {1.5, 1.9, 3.6, 3.1, 5.8, 4.9, 7.7},
       0.9351214510306436, 0.0019881203709805582},
      {{0.1, 0.4, 0.2, 0.9}, {3, -1, 2, -4}, -0.9773756483025025,
       0.022624351697497547},
  };
  for (const auto& c : cases) {
    auto out = Pearson(c.x, c.y);
    ASSERT_TRUE(out.has_value());
    EXPECT_NEAR(out->r, c.r, 1e-12);
    EXPECT_NEAR(out->p, c.p, 1e-10);
    EXPECT_EQ(out->n, static_cast<int>(c.x.size()));
  }
}

// Builds 8 points whose sample correlation is exactly r.
std::pair<std::vector<double>, std::vector<double>> WithCorrelation(double r) {
  const std::vector<double> a = {1, -1, 1, -1, 1, -1, 1, -1};
  const std::vector<double> b = {1, 1, -1, -1, 1, 1, -1, -1};
  std::vector<double> x(8), y(8);
  for (int i = 0; i < 8; ++i) {
    x[i] = a[i];
    y[i] = r * a[i] + std::sqrt(1 - r * r) * b[i];
  }
  return {x, y};
}

TEST(PearsonTest, ReferenceCoefficientPValuePairs) {
  // Correlations over eight datasets and their reported p-values.
  auto [x1, y1] = WithCorrelation(0.8076);
  EXPECT_NEAR(Pearson(x1, y1)->p, 0.0153, 5e-5);
  auto [x2, y2] = WithCorrelation(0.8756);
  EXPECT_NEAR(Pearson(x2, y2)->p, 0.0044, 5e-5);
}

TEST(PearsonTest, Degenerate) {
  const std::vector<double> x = {1, 1, 1, 1};
  const std::vector<double> y = {1, 2, 3, 4};
  EXPECT_FALSE(Pearson(x, y).has_value());
  EXPECT_FALSE(Pearson(y, x).has_value());
  const std::vector<double> two = {1, 2};
  EXPECT_THROW(Pearson(two, two), Error);
}

TEST(RelevanceTest, ThresholdAndImplicit) {
  std::vector<RawInteraction> rows = {{"a", "x", 5.0, {}}, {"a", "y", 3.0, {}},
                                      {"b", "y", 4.0, {}}};
  auto test = BuildInteractionSet(rows, FeedbackSchema::kExplicit);
  auto oracle = BuildRelevanceOracle(test, 4.0);
  EXPECT_EQ(oracle.relevant[0], (ItemSet{0}));
  EXPECT_EQ(oracle.relevant[1], (ItemSet{1}));
  auto all = BuildRelevanceOracle(test, 0.0);
  EXPECT_EQ(all.relevant[0].size(), 2u);
}

struct RandomInstance {
  InteractionSet train;
  RecLists lists;
  RelevanceOracle oracle;
  Grouping grouping;
  ItemPartition partition;
  PopularityTable pop;
};

RandomInstance MakeInstance(uint64_t seed) {
  Rng rng(seed);
  RandomInstance inst;
  const int nu = 12, ni = 25;
  std::vector<RawInteraction> rows;
  for (int u = 0; u < nu; ++u) {
    for (int i = 0; i < ni; ++i) {
      if (UniformUnit(rng) < 0.3 || i == u) {
        rows.push_back({"u" + std::to_string(u), "i" + std::to_string(i), 1.0, {}});
      }
    }
  }
  inst.train = BuildInteractionSet(rows, FeedbackSchema::kImplicit);
  inst.pop = Popularity(inst.train);
  inst.partition = SplitItemsShortLong(inst.pop, 0.2);
  inst.grouping = GroupByActivity(inst.train, 0.25);
  inst.oracle.relevant.resize(nu);
  inst.lists.resize(nu);
  for (int u = 0; u < nu; ++u) {
    for (int j = 0; j < 5; ++j) inst.lists[u].push_back(UniformIndex(rng, ni));
    if (u % 5 != 4) {
      for (int j = 0; j < 3; ++j) inst.oracle.relevant[u].insert(UniformIndex(rng, ni));
    }
  }
  return inst;
}

TEST(EvaluateTest, ReportInvariants) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = MakeInstance(seed);
    EvaluationInput in{&inst.lists, &inst.oracle, &inst.grouping,
                       &inst.partition, &inst.pop, &inst.train, 5};
    auto r = Evaluate(in, "m", Stage::kOrg);
    EXPECT_NEAR(r.ugf, r.ndcg_adv - r.ndcg_dis, 1e-12);
    EXPECT_EQ(r.short_slots + r.long_slots, 12 * 5);
    EXPECT_GE(r.coverage_pct, 0.0);
    EXPECT_LE(r.coverage_pct, 100.0);
    // Users without relevant test items are left out of every NDCG mean.
    double sum = 0.0;
    int n = 0;
    for (int u = 0; u < 12; ++u) {
      if (inst.oracle.relevant[u].empty()) continue;
      sum += NdcgOracle(inst.lists[u], inst.oracle.relevant[u], 5);
      ++n;
    }
    EXPECT_NEAR(r.ndcg_all, sum / n, 1e-12);
    auto again = Evaluate(in, "m", Stage::kFair);
    again.stage = Stage::kOrg;
    EXPECT_EQ(again, r);
  }
}

TEST(ReportCsvTest, RoundTrip) {
  auto inst = MakeInstance(3);
  EvaluationInput in{&inst.lists, &inst.oracle, &inst.grouping,
                     &inst.partition, &inst.pop, &inst.train, 5};
  auto org = Evaluate(in, "wmf", Stage::kOrg);
  auto fair = Evaluate(in, "wmf", Stage::kFair);
  fair.delta_pct = 12.5;
  // F1 is carried by the JSON record, not the CSV table.
  org.f1_all = 0.0;
  fair.f1_all = 0.0;
  const std::vector<MetricReport> rows = {org, fair};
  auto back = ParseReportCsv(FormatReportCsv(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], org);
  EXPECT_EQ(back[1], fair);
  EXPECT_EQ(FormatReportCsv(back), FormatReportCsv(rows));
  EXPECT_EQ(ReportCsvHeader(),
            "model,stage,ndcg_all,ndcg_adv,ndcg_dis,ugf,delta_pct,novelty,"
            "coverage_pct,short_slots,long_slots,dgap_adv,dgap_dis");
}

}  // namespace
}  // namespace fairrank
