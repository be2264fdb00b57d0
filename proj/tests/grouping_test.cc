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

#include "fairrank/grouping.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "fairrank/error.h"
#include "fairrank/util.h"

namespace fairrank {
namespace {

InteractionSet FromPairs(const std::vector<std::pair<int, int>>& pairs) {
  std::vector<RawInteraction> rows;
  for (auto [u, i] : pairs) {
    rows.push_back({"u" + std::to_string(u), "i" + std::to_string(i), 1.0, {}});
  }
  return BuildInteractionSet(rows, FeedbackSchema::kImplicit);
}

// Users 0..n-1 in index order; user u holds 1 + (u * 7919) % 13 items.
InteractionSet VariedActivity(int n_users, int n_items) {
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < n_users; ++u) {
    const int deg = 1 + (u * 7919) % 13;
    for (int j = 0; j < deg; ++j) pairs.push_back({u, (u + j * 31) % n_items});
  }
  return FromPairs(pairs);
}

std::vector<int> TopByKey(const std::vector<int64_t>& key, int m) {
  std::vector<int> order(key.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key[a] > key[b]; });
  order.resize(m);
  std::sort(order.begin(), order.end());
  return order;
}

void ExpectPartition(const Grouping& g) {
  EXPECT_EQ(g.advantaged.size() + g.disadvantaged.size(),
            static_cast<size_t>(g.n_users()));
  std::set<int> all(g.advantaged.begin(), g.advantaged.end());
  all.insert(g.disadvantaged.begin(), g.disadvantaged.end());
  EXPECT_EQ(all.size(), static_cast<size_t>(g.n_users()));
  EXPECT_FALSE(g.advantaged.empty());
  EXPECT_FALSE(g.disadvantaged.empty());
}

struct ReferenceSizes {
  int users;
  int items;
  int g1_adv;
  int g2_adv;
  int short_head;
};

// Reference user/item counts with their group and short-head sizes.
constexpr ReferenceSizes kReference[] = {
    {2677, 2060, 134, 535, 412}, {943, 1349, 47, 188, 269},
    {1136, 1019, 57, 227, 203},  {2170, 1733, 108, 434, 346},
    {2448, 1596, 122, 489, 319}, {1130, 1189, 56, 226, 237},
    {1568, 1461, 78, 313, 292},  {1797, 1507, 90, 359, 301},
};

TEST(GroupSizeTest, ReferenceCounts) {
  for (const auto& r : kReference) {
    EXPECT_EQ(GroupSize(0.05, r.users, SizeRule::kRoundHalfDown), r.g1_adv)
        << r.users;
    EXPECT_EQ(GroupSize(0.2, r.users, SizeRule::kFloor), r.g2_adv) << r.users;
    EXPECT_EQ(GroupSize(0.2, r.items, SizeRule::kFloor), r.short_head)
        << r.items;
  }
}

TEST(GroupSizeTest, Rules) {
  EXPECT_EQ(GroupSize(0.5, 5, SizeRule::kFloor), 2);
  EXPECT_EQ(GroupSize(0.5, 5, SizeRule::kRoundHalfDown), 2);
  EXPECT_EQ(GroupSize(0.5, 5, SizeRule::kRoundHalfUp), 3);
  EXPECT_EQ(GroupSize(0.5, 5, SizeRule::kCeil), 3);
  EXPECT_EQ(GroupSize(0.1, 30, SizeRule::kFloor), 3);  // 0.1*30 is 3.0000000000000004
  EXPECT_EQ(GroupSize(0.1, 30, SizeRule::kCeil), 3);
  EXPECT_EQ(ParseSizeRule("round-half-down"), SizeRule::kRoundHalfDown);
  EXPECT_EQ(ParseSizeRule(SizeRuleName(SizeRule::kCeil)), SizeRule::kCeil);
  EXPECT_THROW(ParseSizeRule("banker"), Error);
}

TEST(ActivityGroupingTest, ReferencePopulations) {
  for (int n : {943, 1136}) {
    auto train = VariedActivity(n, 50);
    auto g = GroupByActivity(train, 0.05);
    EXPECT_EQ(g.advantaged.size(),
              static_cast<size_t>(n == 943 ? 47 : 57));
    ExpectPartition(g);
  }
}

TEST(ActivityGroupingTest, MatchesSortOracle) {
  auto train = VariedActivity(300, 40);
  auto deg = train.UserDegrees();
  std::vector<int64_t> key(deg.begin(), deg.end());
  for (double f : {0.05, 0.2, 0.5}) {
    auto g = GroupByActivity(train, f);
    const int m = GroupSize(f, 300, SizeRule::kRoundHalfDown);
    EXPECT_EQ(g.advantaged, TopByKey(key, m));
    int min_adv = 1 << 30, max_dis = 0;
    for (int u : g.advantaged) min_adv = std::min(min_adv, deg[u]);
    for (int u : g.disadvantaged) max_dis = std::max(max_dis, deg[u]);
    EXPECT_GE(min_adv, max_dis);
  }
}

TEST(ActivityGroupingTest, EqualActivityTakesLowestIndices) {
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < 10; ++u) pairs.push_back({u, u});
  auto g = GroupByActivity(FromPairs(pairs), 0.3);
  EXPECT_EQ(g.advantaged, (std::vector<int>{0, 1, 2}));
}

TEST(ActivityGroupingTest, DegenerateSizesThrow) {
  auto train = VariedActivity(10, 20);
  try {
    GroupByActivity(train, 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateGrouping);
  }
  EXPECT_THROW(GroupByActivity(train, 0.99, SizeRule::kCeil), Error);
  EXPECT_THROW(GroupByActivity(train, 0.0), Error);
  EXPECT_THROW(GroupByActivity(train, 1.0), Error);
}

TEST(PopularGroupingTest, MatchesCountOracle) {
  auto train = VariedActivity(200, 60);
  auto pop = Popularity(train);
  auto items = SplitItemsShortLong(pop, 0.2);
  std::vector<int64_t> key(200, 0);
  for (const auto& x : train.interactions) {
    if (items.is_short_head[x.item]) ++key[x.user];
  }
  auto g = GroupByPopularConsumption(train, 0.2, 0.2);
  EXPECT_EQ(g.advantaged, TopByKey(key, 40));
  ExpectPartition(g);
}

TEST(PopularGroupingTest, IgnoresProfileSize) {
  // i0, i1 are popular. User 0 has one popular and many niche items; user 1
  // has one popular item only; user 2 has two popular items.
  std::vector<std::pair<int, int>> pairs = {{0, 0}, {1, 0}, {2, 0}, {2, 1},
                                            {3, 1}, {4, 1}};
  for (int j = 0; j < 6; ++j) pairs.push_back({0, 10 + j});
  pairs.push_back({5, 20});
  pairs.push_back({5, 21});
  auto train = FromPairs(pairs);
  auto g = GroupByPopularConsumption(train, 0.2, 0.2);
  // Two of 10 items are short-head; one of 6 users is advantaged.
  ASSERT_EQ(g.advantaged.size(), 1u);
  EXPECT_EQ(train.users.External(g.advantaged[0]), "u2");
}

TEST(PopularGroupingTest, ZeroPopularUsersFillOnlyWhenNeeded) {
  // Only user 0 touches the single short-head item; m = 2 forces a
  // zero-count user in, chosen by lowest index.
  std::vector<std::pair<int, int>> pairs = {{0, 0}, {0, 1}, {1, 0},
                                            {2, 2}, {3, 3}, {4, 4}};
  auto train = FromPairs(pairs);
  auto pop = Popularity(train);
  auto items = SplitItemsShortLong(pop, 0.2);
  ASSERT_EQ(items.short_head, (std::vector<int>{0}));
  auto g = GroupByPopularConsumption(train, 0.2, 0.4);
  EXPECT_EQ(g.advantaged, (std::vector<int>{0, 1}));
  auto g1 = GroupByPopularConsumption(train, 0.2, 0.2);
  EXPECT_EQ(g1.advantaged, (std::vector<int>{0}));
}

TEST(ItemPartitionTest, FloorSizeAndOrdering) {
  Rng rng(4);
  for (int n : {1019, 1349, 2060, 37}) {
    PopularityTable pop;
    pop.counts.resize(n);
    for (auto& c : pop.counts) c = UniformIndex(rng, 20);
    auto p = SplitItemsShortLong(pop, 0.2);
    EXPECT_EQ(p.short_head.size(), static_cast<size_t>(n / 5));
    EXPECT_EQ(p.short_head.size() + p.long_tail.size(), static_cast<size_t>(n));
    EXPECT_EQ(p.short_head, TopByKey(pop.counts, n / 5));
    int64_t min_short = 1 << 30, max_long = 0;
    for (int i : p.short_head) min_short = std::min(min_short, pop.counts[i]);
    for (int i : p.long_tail) max_long = std::max(max_long, pop.counts[i]);
    EXPECT_GE(min_short, max_long);
  }
}

TEST(GroupingIoTest, RoundTrip) {
  auto train = VariedActivity(50, 30);
  auto g = GroupByPopularConsumption(train, 0.2, 0.2);
  auto back = ParseGrouping(FormatGrouping(g, train.users), train.users);
  EXPECT_EQ(back.is_advantaged, g.is_advantaged);
  EXPECT_EQ(back.method, GroupingMethod::kPopularConsumption);
  auto items = SplitItemsShortLong(Popularity(train), 0.2);
  auto items_back =
      ParseItemPartition(FormatItemPartition(items, train.items), train.items);
  EXPECT_EQ(items_back.is_short_head, items.is_short_head);
}

TEST(GroupingIoTest, UnknownUserAndBadLabel) {
  auto train = VariedActivity(3, 5);
  EXPECT_THROW(ParseGrouping("nobody\tadv\n", train.users), Error);
  EXPECT_THROW(ParseGrouping("u0\tmaybe\n", train.users), Error);
}

}  // namespace
}  // namespace fairrank
