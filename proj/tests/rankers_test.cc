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

#include "fairrank/rankers.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

#include "fairrank/error.h"
#include "fairrank/metrics.h"
#include "fairrank/util.h"

namespace fairrank {
namespace {

InteractionSet FromText(const std::string& text) {
  std::istringstream in(text);
  auto rows = ParseInteractions(in, FeedbackSchema::kExplicit, '\t');
  return BuildInteractionSet(rows, FeedbackSchema::kExplicit);
}

InteractionSet Synthetic(uint64_t seed) {
  SyntheticParams p;
  p.n_users = 300;
  p.n_items = 200;
  p.density = 0.05;
  p.popularity_skew = 0.5;
  p.seed = seed;
  return GenerateSynthetic(p);
}

void ExpectValidCandidates(const CandidateLists& c, const InteractionSet& train,
                           int n) {
  const auto seen = train.SortedItemsByUser();
  ASSERT_EQ(c.n_users(), train.n_users());
  for (int u = 0; u < c.n_users(); ++u) {
    const auto& list = c.lists[u];
    const size_t expected = std::min<size_t>(n, train.n_items() - seen[u].size());
    EXPECT_EQ(list.size(), expected);
    for (size_t j = 0; j < list.size(); ++j) {
      EXPECT_FALSE(std::binary_search(seen[u].begin(), seen[u].end(),
                                      list[j].item));
      if (j > 0) EXPECT_TRUE(CandidateBefore(list[j - 1], list[j]));
    }
  }
}

// Mean per-user probability that a held-out positive outranks an item the
// user never interacted with.
double HeldOutAuc(const Scorer& model, const DataSplit& split) {
  const auto train_seen = split.train.SortedItemsByUser();
  const auto test_seen = split.test.SortedItemsByUser();
  std::vector<double> scores(model.n_items());
  double total = 0.0;
  int users = 0;
  for (int u = 0; u < model.n_users(); ++u) {
    if (test_seen[u].empty()) continue;
    model.ScoreUser(u, scores);
    int64_t wins = 0, pairs = 0;
    for (int pos : test_seen[u]) {
      for (int neg = 0; neg < model.n_items(); ++neg) {
        if (std::binary_search(train_seen[u].begin(), train_seen[u].end(), neg) ||
            std::binary_search(test_seen[u].begin(), test_seen[u].end(), neg)) {
          continue;
        }
        ++pairs;
        if (scores[pos] > scores[neg]) ++wins;
      }
    }
    total += static_cast<double>(wins) / pairs;
    ++users;
  }
  return total / users;
}

double MeanNdcg(const Scorer& model, const DataSplit& split, int k) {
  auto c = PredictTopN(model, split.train, k);
  auto oracle = BuildRelevanceOracle(split.test, 0.0);
  double sum = 0.0;
  int n = 0;
  for (int u = 0; u < c.n_users(); ++u) {
    if (!oracle.Evaluable(u)) continue;
    std::vector<int> items;
    for (const auto& x : c.lists[u]) items.push_back(x.item);
    sum += NdcgAtK(items, oracle.relevant[u], k);
    ++n;
  }
  return sum / n;
}

TEST(MostPopTest, SharedRankingWithExclusion) {
  // Popularity i0:3, i1:2, i2:1.
  auto d = FromText("a\ti0\t1\nb\ti0\t1\nc\ti0\t1\nb\ti1\t1\nc\ti1\t1\nc\ti2\t1\n"
                    "d\ti9\t1\n");
  auto model = TrainMostPop(d);
  auto c = PredictTopN(model, d, 3);
  // User d never saw i0, i1, i2.
  ASSERT_EQ(c.lists[3].size(), 3u);
  EXPECT_EQ(c.lists[3][0].item, 0);
  EXPECT_EQ(c.lists[3][1].item, 1);
  EXPECT_EQ(c.lists[3][2].item, 2);
  // User a already has i0, so its list starts at i1.
  EXPECT_EQ(c.lists[0][0].item, 1);
  for (int u = 0; u < d.n_users(); ++u) {
    for (const auto& x : c.lists[u]) {
      EXPECT_EQ(x.score, model.Score(0, x.item));
    }
  }
}

TEST(PredictTest, ListLengthIsBoundedByUnseenItems) {
  auto d = FromText("a\ti0\t1\na\ti1\t1\nb\ti2\t1\nb\ti3\t1\nb\ti4\t1\n");
  auto c = PredictTopN(TrainMostPop(d), d, 10);
  EXPECT_EQ(c.lists[0].size(), 3u);
  EXPECT_EQ(c.lists[1].size(), 2u);
}

TEST(PredictTest, MatchesFullSortOracle) {
  Rng rng(21);
  FactorModel model;
  model.user_factors = FactorModel::Matrix(20, 3);
  model.item_factors = FactorModel::Matrix(30, 3);
  // Coarse values force many exact ties.
  for (int r = 0; r < 20; ++r) {
    for (int f = 0; f < 3; ++f) model.user_factors(r, f) = UniformIndex(rng, 3);
  }
  for (int r = 0; r < 30; ++r) {
    for (int f = 0; f < 3; ++f) model.item_factors(r, f) = UniformIndex(rng, 3);
  }
  std::vector<RawInteraction> rows;
  for (int u = 0; u < 20; ++u) {
    rows.push_back({"u" + std::to_string(u), "i" + std::to_string(u), 1.0, {}});
    rows.push_back({"u" + std::to_string(u), "i" + std::to_string(29 - u), 1.0, {}});
  }
  auto train = BuildInteractionSet(rows, FeedbackSchema::kImplicit);
  // Re-index the model to the train id order.
  FactorModel aligned = model;
  for (int i = 0; i < 30; ++i) {
    aligned.item_factors.row(i) =
        model.item_factors.row(ParseInt(train.items.External(i).substr(1), "id"));
  }
  for (int n : {1, 5, 28, 40}) {
    auto c = PredictTopN(aligned, train, n, 3);
    ExpectValidCandidates(c, train, n);
    const auto seen = train.SortedItemsByUser();
    for (int u = 0; u < 20; ++u) {
      std::vector<Candidate> all;
      for (int i = 0; i < 30; ++i) {
        if (std::binary_search(seen[u].begin(), seen[u].end(), i)) continue;
        all.push_back({i, aligned.user_factors.row(u).dot(aligned.item_factors.row(i))});
      }
      std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.score != b.score ? a.score > b.score : a.item < b.item;
      });
      if (all.size() > static_cast<size_t>(n)) all.resize(n);
      EXPECT_EQ(c.lists[u], all) << "user " << u << " n " << n;
    }
  }
}

TEST(BprTest, SeparatesSingleObservedItem) {
  auto d = FromText("u\ta\t1\nv\tb\t1\n");
  BprOptions o;
  o.dim = 4;
  o.epochs = 200;
  o.learning_rate = 0.05;
  auto model = TrainBpr(d, o);
  EXPECT_GT(model.Score(0, 0), model.Score(0, 1));
  EXPECT_GT(model.Score(1, 1), model.Score(1, 0));
}

TEST(BprTest, Deterministic) {
  auto d = Synthetic(1);
  BprOptions o;
  o.dim = 8;
  o.epochs = 3;
  o.seed = 5;
  auto a = TrainBpr(d, o);
  auto b = TrainBpr(d, o);
  EXPECT_EQ(a.user_factors, b.user_factors);
  EXPECT_EQ(a.item_factors, b.item_factors);
  EXPECT_EQ(a.item_bias, b.item_bias);
}

TEST(BprTest, HeldOutAucOnSyntheticData) {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto split = SplitHoldout(Synthetic(seed), 0.2, seed);
    BprOptions o;
    o.dim = 16;
    o.epochs = 60;
    o.learning_rate = 0.05;
    o.reg = 0.05;
    o.seed = seed;
    EXPECT_GT(HeldOutAuc(TrainBpr(split.train, o), split), 0.80)
        << "seed " << seed;
  }
}

TEST(BprTest, DivergenceIsReported) {
  auto d = Synthetic(3);
  BprOptions o;
  o.dim = 8;
  o.epochs = 20;
  o.learning_rate = 1e6;
  try {
    TrainBpr(d, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTraining);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(WmfTest, HugeRegularizationZeroesScores) {
  auto d = Synthetic(4);
  WmfOptions o;
  o.dim = 4;
  o.iterations = 3;
  o.reg = 1e12;
  auto model = TrainWmf(d, o);
  EXPECT_LT(model.user_factors.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(model.item_factors.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(WmfTest, ObjectiveNonIncreasing) {
  auto d = Synthetic(5);
  WmfOptions o;
  o.dim = 8;
  o.iterations = 10;
  o.reg = 0.1;
  TrainTrace trace;
  TrainWmf(d, o, &trace);
  ASSERT_GE(trace.values.size(), 10u);
  for (size_t t = 1; t < trace.values.size(); ++t) {
    EXPECT_LE(trace.values[t], trace.values[t - 1] + 1e-9 * std::abs(trace.values[t - 1]));
  }
  EXPECT_NEAR(trace.values.back(),
              WmfObjective(d, TrainWmf(d, o), o.confidence_alpha, o.reg),
              1e-9 * std::abs(trace.values.back()));
}

TEST(WmfTest, ThreadCountDoesNotChangeResult) {
  auto d = Synthetic(6);
  WmfOptions o;
  o.dim = 6;
  o.iterations = 4;
  o.threads = 1;
  auto a = TrainWmf(d, o);
  o.threads = 7;
  auto b = TrainWmf(d, o);
  EXPECT_EQ(a.user_factors, b.user_factors);
  EXPECT_EQ(a.item_factors, b.item_factors);
}

TEST(WmfTest, BeatsMostPopOnMostSeeds) {
  int wins = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto split = SplitHoldout(Synthetic(seed), 0.2, seed);
    WmfOptions o;
    o.dim = 8;
    o.seed = seed;
    const double wmf = MeanNdcg(TrainWmf(split.train, o), split, 10);
    const double pop = MeanNdcg(TrainMostPop(split.train), split, 10);
    if (wmf > pop) ++wins;
  }
  EXPECT_GE(wins, 3);
}

TEST(PfTest, ReconstructsDiagonalCounts) {
  auto d = FromText("a\tx\t3\nb\ty\t3\n");
  PfOptions o;
  o.dim = 2;
  o.iterations = 200;
  auto model = TrainPf(d, o);
  EXPECT_NEAR(model.Score(0, 0), 3.0, 0.5);
  EXPECT_NEAR(model.Score(1, 1), 3.0, 0.5);
  EXPECT_NEAR(model.Score(0, 1), 0.0, 0.5);
  EXPECT_NEAR(model.Score(1, 0), 0.0, 0.5);
}

TEST(PfTest, ElboNonDecreasingAndFactorsNonNegative) {
  auto d = Synthetic(7);
  PfOptions o;
  o.dim = 8;
  o.iterations = 25;
  o.threads = 3;
  TrainTrace trace;
  auto model = TrainPf(d, o, &trace);
  ASSERT_GE(trace.values.size(), 2u);
  for (size_t t = 1; t < trace.values.size(); ++t) {
    EXPECT_GE(trace.values[t], trace.values[t - 1] - 1e-6 * std::abs(trace.values[t - 1]));
  }
  EXPECT_GE(model.user_factors.minCoeff(), 0.0);
  EXPECT_GE(model.item_factors.minCoeff(), 0.0);
  o.threads = 1;
  auto single = TrainPf(d, o);
  EXPECT_EQ(single.user_factors, model.user_factors);
}

TEST(ImportTest, SortsAndTruncates) {
  auto d = FromText("a\tx\t1\nb\ty\t1\nc\tz\t1\nc\tw\t1\n");
  std::istringstream in("a\ty\t0.5\na\tz\t0.9\na\tw\t0.1\nb\tx\t2\nb\tz\t2\nb\tw\t3\n");
  auto c = ParseScores(in, d, 2);
  ASSERT_EQ(c.lists[0].size(), 2u);
  EXPECT_EQ(d.items.External(c.lists[0][0].item), "z");
  EXPECT_EQ(d.items.External(c.lists[0][1].item), "y");
  ASSERT_EQ(c.lists[1].size(), 2u);
  EXPECT_EQ(d.items.External(c.lists[1][0].item), "w");
  EXPECT_EQ(d.items.External(c.lists[1][1].item), "x");
  EXPECT_TRUE(c.lists[2].empty());
}

TEST(ImportTest, UnknownIdIsNamed) {
  auto d = FromText("a\tx\t1\n");
  std::istringstream in("a\tghost_item\t0.5\n");
  try {
    ParseScores(in, d, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kResolution);
    EXPECT_NE(std::string(e.what()).find("ghost_item"), std::string::npos);
  }
  std::istringstream bad("a\tx\tinf\n");
  EXPECT_THROW(ParseScores(bad, d, 2), Error);
}

TEST(ImportTest, ExportRoundTrip) {
  auto split = SplitHoldout(Synthetic(8), 0.2, 8);
  WmfOptions o;
  o.dim = 4;
  o.iterations = 3;
  auto c = PredictTopN(TrainWmf(split.train, o), split.train, 20);
  std::istringstream in(FormatScores(c, split.train));
  auto back = ParseScores(in, split.train, 20);
  EXPECT_EQ(back.lists, c.lists);
  ExpectValidCandidates(back, split.train, 20);
}

TEST(CheckpointTest, SaveLoadRoundTrip) {
  auto d = Synthetic(9);
  BprOptions o;
  o.dim = 5;
  o.epochs = 2;
  o.seed = 77;
  auto model = TrainBpr(d, o);
  const auto path = std::filesystem::temp_directory_path() / "fairrank_model.txt";
  SaveModel(model, path);
  auto back = LoadModel(path);
  EXPECT_EQ(back.name, "bpr");
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.user_factors, model.user_factors);
  EXPECT_EQ(back.item_factors, model.item_factors);
  EXPECT_EQ(back.item_bias, model.item_bias);
  WriteFileAtomic(path, "not a model\n");
  EXPECT_THROW(LoadModel(path), Error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace fairrank
