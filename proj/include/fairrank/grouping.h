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

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fairrank/ingest.h"

namespace fairrank {

// How a fraction of a population is turned into a group size.
enum class SizeRule { kFloor, kRoundHalfDown, kRoundHalfUp, kCeil };

SizeRule ParseSizeRule(std::string_view name);
std::string_view SizeRuleName(SizeRule rule);

// Applies `rule` to fraction * population with a 1e-9 guard against binary
// representation error (0.05 * 2170 rounds half-down to 108).
int GroupSize(double fraction, int population, SizeRule rule);

enum class GroupingMethod { kActivity, kPopularConsumption };

// Binary advantaged/disadvantaged user labeling.
struct Grouping {
  GroupingMethod method = GroupingMethod::kActivity;
  std::vector<double> parameters;
  std::vector<char> is_advantaged;  // per user index
  std::vector<int> advantaged;      // ascending
  std::vector<int> disadvantaged;   // ascending

  int n_users() const { return static_cast<int>(is_advantaged.size()); }
  std::string Label() const;

  // Builds from a per-user flag vector; throws kDegenerateGrouping when
  // either side is empty.
  static Grouping FromFlags(std::vector<char> flags, GroupingMethod method,
                            std::vector<double> parameters);
};

struct ItemPartition {
  double fraction = 0.2;
  std::vector<char> is_short_head;  // per item index
  std::vector<int> short_head;      // ascending
  std::vector<int> long_tail;       // ascending
};

// G1: the GroupSize(fraction, |U|) most active users, ties by ascending
// user index.
Grouping GroupByActivity(const InteractionSet& train, double fraction,
                         SizeRule rule = SizeRule::kRoundHalfDown);

// G2: users ranked by how many short-head items (at item_fraction) their
// train profile holds; the top GroupSize(user_fraction, |U|) are advantaged.
Grouping GroupByPopularConsumption(const InteractionSet& train,
                                   double item_fraction, double user_fraction,
                                   SizeRule rule = SizeRule::kFloor);

// Short head = the floor(fraction * |I|) most popular items, ties by
// ascending item index.
ItemPartition SplitItemsShortLong(const PopularityTable& pop, double fraction,
                                  SizeRule rule = SizeRule::kFloor);

// `user<TAB>adv|dis` lines in user index order.
std::string FormatGrouping(const Grouping& grouping, const IdMap& users);
Grouping ParseGrouping(std::string_view text, const IdMap& users);
// `item<TAB>short|long` lines in item index order.
std::string FormatItemPartition(const ItemPartition& partition,
                                const IdMap& items);
ItemPartition ParseItemPartition(std::string_view text, const IdMap& items);

}  // namespace fairrank
