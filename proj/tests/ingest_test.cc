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

#include "fairrank/ingest.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fairrank/error.h"
#include "fairrank/util.h"

namespace fairrank {
namespace {

InteractionSet FromText(const std::string& text,
                        FeedbackSchema schema = FeedbackSchema::kExplicit) {
  std::istringstream in(text);
  auto rows = ParseInteractions(in, schema, '\t');
  return BuildInteractionSet(rows, schema);
}

using PairSet = std::set<std::pair<std::string, std::string>>;

PairSet Pairs(const InteractionSet& d) {
  PairSet out;
  for (const auto& x : d.interactions) {
    out.insert({d.users.External(x.user), d.items.External(x.item)});
  }
  return out;
}

// Independent k-core: delete any edge touching a light endpoint until no
// edge is deleted.
PairSet PeelOracle(PairSet edges, int k) {
  while (true) {
    std::map<std::string, int> du, di;
    for (const auto& [u, i] : edges) {
      du[u]++;
      di[i]++;
    }
    PairSet kept;
    for (const auto& e : edges) {
      if (du[e.first] >= k && di[e.second] >= k) kept.insert(e);
    }
    if (kept.size() == edges.size()) return kept;
    edges = std::move(kept);
  }
}

InteractionSet RandomBipartite(int nu, int ni, double p, uint64_t seed) {
  Rng rng(seed);
  std::vector<RawInteraction> rows;
  for (int u = 0; u < nu; ++u) {
    for (int i = 0; i < ni; ++i) {
      if (UniformUnit(rng) < p) {
        rows.push_back({"u" + std::to_string(u), "i" + std::to_string(i),
                        std::nullopt, std::nullopt});
      }
    }
  }
  Shuffle(rows, rng);
  return BuildInteractionSet(rows, FeedbackSchema::kImplicit);
}

TEST(LoadTest, CountsUsersItemsPairs) {
  auto d = FromText("u1\ti1\t5\nu1\ti2\t3\nu2\ti1\t4\n");
  EXPECT_EQ(d.n_users(), 2);
  EXPECT_EQ(d.n_items(), 2);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.users.External(0), "u1");
  EXPECT_EQ(d.items.External(1), "i2");
}

TEST(LoadTest, LastDuplicateWins) {
  auto d = FromText("u1\ti1\t5\nu1\ti2\t3\nu2\ti1\t4\nu1\ti1\t2\n");
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.interactions[0].rating, 2.0);
}

TEST(LoadTest, ImplicitRatingsAreOne) {
  auto d = FromText("a\tx\nb\tx\t7\n", FeedbackSchema::kImplicit);
  for (const auto& x : d.interactions) EXPECT_EQ(x.rating, 1.0);
}

TEST(LoadTest, MalformedLineReportsLineNumber) {
  try {
    FromText("u1\ti1\t5\n# comment\nbroken\n");
    FAIL() << "expected a parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos)
        << e.what();
  }
  EXPECT_THROW(FromText("u1\ti1\tnan\n"), Error);
  EXPECT_THROW(FromText("u1\ti1\n"), Error);  // explicit needs a rating
}

TEST(LoadTest, EmptyFileIsEmptyDataset) {
  const auto path =
      std::filesystem::temp_directory_path() / "fairrank_empty.tsv";
  WriteFileAtomic(path, "# only a comment\n\n");
  try {
    LoadInteractions(path, FeedbackSchema::kImplicit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
  std::filesystem::remove(path);
}

TEST(LoadTest, FormatParsesBack) {
  auto d = FromText("u1\ti1\t5\nu2\ti2\t0.25\n");
  std::istringstream in(FormatInteractions(d));
  auto rows = ParseInteractions(in, FeedbackSchema::kExplicit, '\t');
  EXPECT_EQ(BuildInteractionSet(rows, FeedbackSchema::kExplicit), d);
}

TEST(KCoreTest, FixedPointUnchanged) {
  auto d = FromText("a\tx\t1\na\ty\t1\nb\tx\t1\nb\ty\t1\n");
  EXPECT_EQ(KCoreFilter(d, 2), d);
}

TEST(KCoreTest, ChainCascadesToEmpty) {
  auto d = FromText("u1\ti1\t1\nu2\ti1\t1\nu2\ti2\t1\n");
  try {
    KCoreFilter(d, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyAfterFilter);
    EXPECT_NE(std::string(e.what()).find("round 1 still held 1 "), std::string::npos)
        << e.what();
  }
}

TEST(KCoreTest, MatchesPeelOracleOnRandomGraph) {
  auto d = RandomBipartite(50, 50, 0.08, 5);
  auto core = KCoreFilter(d, 3);
  EXPECT_EQ(Pairs(core), PeelOracle(Pairs(d), 3));
}

TEST(KCoreTest, IdempotentWithMinimumDegrees) {
  int nonempty = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto d = RandomBipartite(30 + seed % 20, 25 + seed % 15,
                             0.05 + 0.002 * seed, seed);
    const int k = 2 + seed % 3;
    InteractionSet core;
    try {
      core = KCoreFilter(d, k);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kEmptyAfterFilter);
      EXPECT_TRUE(PeelOracle(Pairs(d), k).empty());
      continue;
    }
    ++nonempty;
    EXPECT_EQ(KCoreFilter(core, k), core);
    for (int deg : core.UserDegrees()) EXPECT_GE(deg, k);
    for (int deg : core.ItemDegrees()) EXPECT_GE(deg, k);
    EXPECT_EQ(Pairs(core), PeelOracle(Pairs(d), k));
  }
  EXPECT_GT(nonempty, 50);
}

TEST(SplitTest, ProportionsAndSingletons) {
  std::string text;
  for (int i = 0; i < 10; ++i) text += "a\tx" + std::to_string(i) + "\t1\n";
  text += "b\tx0\t1\n";
  auto d = FromText(text);
  auto split = SplitHoldout(d, 0.2, 1);
  auto train_deg = split.train.UserDegrees();
  auto test_deg = split.test.UserDegrees();
  EXPECT_EQ(train_deg[0], 8);
  EXPECT_EQ(test_deg[0], 2);
  EXPECT_EQ(train_deg[1], 1);
  EXPECT_EQ(test_deg[1], 0);
}

TEST(SplitTest, PartitionAndDeterminism) {
  auto d = RandomBipartite(100, 40, 0.2, 9);
  auto a = SplitHoldout(d, 0.3, 42);
  auto b = SplitHoldout(d, 0.3, 42);
  auto c = SplitHoldout(d, 0.3, 43);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.test, c.test);
  PairSet train = Pairs(a.train), test = Pairs(a.test), all = Pairs(d);
  for (const auto& e : test) EXPECT_EQ(train.count(e), 0u);
  PairSet merged = train;
  merged.insert(test.begin(), test.end());
  EXPECT_EQ(merged, all);
  auto deg = a.train.UserDegrees();
  auto full = d.UserDegrees();
  for (int u = 0; u < d.n_users(); ++u) {
    if (full[u] > 0) {
      EXPECT_GE(deg[u], 1);
    }
  }
}

TEST(SplitTest, SaveLoadRoundTrip) {
  auto d = RandomBipartite(20, 20, 0.3, 2);
  auto split = SplitHoldout(d, 0.2, 3);
  const auto dir = std::filesystem::temp_directory_path() / "fairrank_split";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  SaveSplit(split, dir);
  auto back = LoadSplit(dir);
  EXPECT_EQ(back.train, split.train);
  EXPECT_EQ(back.test, split.test);
  EXPECT_EQ(back.seed, 3u);
  std::filesystem::remove_all(dir);
}

TEST(PopularityTest, Counts) {
  auto d = FromText("a\ti0\t1\nb\ti0\t1\nc\ti0\t1\nc\ti1\t1\n");
  auto pop = Popularity(d);
  EXPECT_EQ(pop.counts[0], 3);
  EXPECT_EQ(pop.counts[1], 1);
  EXPECT_EQ(pop.Total(), 4);
  auto uniform = FromText("a\tx\t1\nb\ty\t1\nc\tz\t1\n");
  for (auto c : Popularity(uniform).counts) EXPECT_EQ(c, 1);
}

TEST(SyntheticTest, FullDensity) {
  SyntheticParams p;
  p.n_users = 20;
  p.n_items = 15;
  p.density = 1.0;
  auto d = GenerateSynthetic(p);
  EXPECT_EQ(d.size(), 300u);
}

TEST(SyntheticTest, Deterministic) {
  SyntheticParams p;
  p.seed = 17;
  EXPECT_EQ(GenerateSynthetic(p), GenerateSynthetic(p));
  SyntheticParams q = p;
  q.seed = 18;
  EXPECT_NE(GenerateSynthetic(p), GenerateSynthetic(q));
}

TEST(SyntheticTest, NoSkewIsNearUniform) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticParams p;
    p.n_users = 100;
    p.n_items = 100;
    p.density = 0.2;
    p.popularity_skew = 0.0;
    p.seed = seed;
    auto counts = Popularity(GenerateSynthetic(p)).counts;
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    ASSERT_GT(*lo, 0);
    EXPECT_LE(static_cast<double>(*hi) / *lo, 3.0) << "seed " << seed;
  }
}

TEST(SyntheticTest, SkewConcentratesOnHead) {
  SyntheticParams p;
  p.n_items = 200;
  p.popularity_skew = 1.5;
  p.seed = 4;
  auto counts = Popularity(GenerateSynthetic(p)).counts;
  std::sort(counts.begin(), counts.end(), std::greater<>());
  const int64_t total = std::accumulate(counts.begin(), counts.end(), int64_t{0});
  const int64_t head = std::accumulate(counts.begin(), counts.begin() + 40, int64_t{0});
  EXPECT_GT(static_cast<double>(head) / total, 0.6);
}

}  // namespace
}  // namespace fairrank
