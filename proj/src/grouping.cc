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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fairrank/error.h"
#include "fairrank/util.h"

namespace fairrank {

SizeRule ParseSizeRule(std::string_view name) {
  if (name == "floor") return SizeRule::kFloor;
  if (name == "round-half-down") return SizeRule::kRoundHalfDown;
  if (name == "round-half-up") return SizeRule::kRoundHalfUp;
  if (name == "ceil") return SizeRule::kCeil;
  throw Error(ErrorCode::kConfig, "unknown size rule '" + std::string(name) + "'");
}

std::string_view SizeRuleName(SizeRule rule) {
  switch (rule) {
    case SizeRule::kFloor: return "floor";
    case SizeRule::kRoundHalfDown: return "round-half-down";
    case SizeRule::kRoundHalfUp: return "round-half-up";
    case SizeRule::kCeil: return "ceil";
  }
  return "floor";
}

int GroupSize(double fraction, int population, SizeRule rule) {
  constexpr double kGuard = 1e-9;
  const double x = fraction * population;
  double size = 0.0;
  switch (rule) {
    case SizeRule::kFloor: size = std::floor(x + kGuard); break;
    case SizeRule::kCeil: size = std::ceil(x - kGuard); break;
    case SizeRule::kRoundHalfDown: size = std::ceil(x - 0.5 - kGuard); break;
    case SizeRule::kRoundHalfUp: size = std::floor(x + 0.5 + kGuard); break;
  }
  return std::clamp(static_cast<int>(size), 0, population);
}

std::string Grouping::Label() const {
  return method == GroupingMethod::kActivity ? "G1" : "G2";
}

Grouping Grouping::FromFlags(std::vector<char> flags, GroupingMethod method,
                             std::vector<double> parameters) {
  Grouping g;
  g.method = method;
  g.parameters = std::move(parameters);
  g.is_advantaged = std::move(flags);
  for (int u = 0; u < g.n_users(); ++u) {
    (g.is_advantaged[u] ? g.advantaged : g.disadvantaged).push_back(u);
  }
  if (g.advantaged.empty() || g.disadvantaged.empty()) {
    throw Error(ErrorCode::kDegenerateGrouping,
                "grouping has " + std::to_string(g.advantaged.size()) +
                    " advantaged and " +
                    std::to_string(g.disadvantaged.size()) +
                    " disadvantaged users");
  }
  return g;
}

namespace {

// Flags the top m users by descending key, ties by ascending index.
std::vector<char> TopUsers(const std::vector<int>& key, int m) {
  std::vector<int> order(key.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key[a] > key[b]; });
  std::vector<char> flags(key.size(), 0);
  for (int j = 0; j < m; ++j) flags[order[j]] = 1;
  return flags;
}

}  // namespace

Grouping GroupByActivity(const InteractionSet& train, double fraction,
                         SizeRule rule) {
  Require(fraction > 0.0 && fraction < 1.0, "G1 fraction must lie in (0, 1)");
  const int m = GroupSize(fraction, train.n_users(), rule);
  return Grouping::FromFlags(TopUsers(train.UserDegrees(), m),
                             GroupingMethod::kActivity, {fraction});
}

Grouping GroupByPopularConsumption(const InteractionSet& train,
                                   double item_fraction, double user_fraction,
                                   SizeRule rule) {
  Require(item_fraction > 0.0 && item_fraction < 1.0 && user_fraction > 0.0 &&
              user_fraction < 1.0,
          "G2 fractions must lie in (0, 1)");
  const ItemPartition partition =
      SplitItemsShortLong(Popularity(train), item_fraction);
  std::vector<int> popular_count(train.n_users(), 0);
  for (const auto& x : train.interactions) {
    if (partition.is_short_head[x.item]) ++popular_count[x.user];
  }
  const int m = GroupSize(user_fraction, train.n_users(), rule);
  return Grouping::FromFlags(TopUsers(popular_count, m),
                             GroupingMethod::kPopularConsumption,
                             {item_fraction, user_fraction});
}

ItemPartition SplitItemsShortLong(const PopularityTable& pop, double fraction,
                                  SizeRule rule) {
  Require(fraction > 0.0 && fraction < 1.0,
          "short-head fraction must lie in (0, 1)");
  const int n = static_cast<int>(pop.counts.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return pop.counts[a] > pop.counts[b];
  });
  const int m = GroupSize(fraction, n, rule);
  ItemPartition partition;
  partition.fraction = fraction;
  partition.is_short_head.assign(n, 0);
  for (int j = 0; j < m; ++j) partition.is_short_head[order[j]] = 1;
  for (int i = 0; i < n; ++i) {
    (partition.is_short_head[i] ? partition.short_head : partition.long_tail)
        .push_back(i);
  }
  return partition;
}

namespace {

// Reads `id<TAB>label` lines resolved through `ids`; every id must appear.
std::vector<char> ParseLabels(std::string_view text, const IdMap& ids,
                              std::string_view positive,
                              std::string_view negative) {
  std::vector<int> label(ids.size(), -1);
  std::istringstream in{std::string(text)};
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    const std::string context = "label line " + std::to_string(line_number);
    auto fields = SplitFields(line, '\t');
    if (fields.size() != 2) throw Error(ErrorCode::kParse, context + ": expected 2 fields");
    auto index = ids.Find(fields[0]);
    if (!index) {
      throw Error(ErrorCode::kResolution,
                  context + ": unknown id '" + std::string(fields[0]) + "'");
    }
    if (fields[1] == positive) {
      label[*index] = 1;
    } else if (fields[1] == negative) {
      label[*index] = 0;
    } else {
      throw Error(ErrorCode::kParse,
                  context + ": bad label '" + std::string(fields[1]) + "'");
    }
  }
  std::vector<char> flags(ids.size());
  for (int i = 0; i < ids.size(); ++i) {
    if (label[i] < 0) {
      throw Error(ErrorCode::kResolution,
                  "no label for id '" + ids.External(i) + "'");
    }
    flags[i] = static_cast<char>(label[i]);
  }
  return flags;
}

}  // namespace

std::string FormatGrouping(const Grouping& grouping, const IdMap& users) {
  std::string out = "# method " + grouping.Label() + "\n";
  for (int u = 0; u < grouping.n_users(); ++u) {
    out += users.External(u);
    out += grouping.is_advantaged[u] ? "\tadv\n" : "\tdis\n";
  }
  return out;
}

Grouping ParseGrouping(std::string_view text, const IdMap& users) {
  GroupingMethod method = GroupingMethod::kActivity;
  if (text.starts_with("# method G2")) method = GroupingMethod::kPopularConsumption;
  return Grouping::FromFlags(ParseLabels(text, users, "adv", "dis"), method, {});
}

std::string FormatItemPartition(const ItemPartition& partition,
                                const IdMap& items) {
  std::string out;
  for (size_t i = 0; i < partition.is_short_head.size(); ++i) {
    out += items.External(static_cast<int>(i));
    out += partition.is_short_head[i] ? "\tshort\n" : "\tlong\n";
  }
  return out;
}

ItemPartition ParseItemPartition(std::string_view text, const IdMap& items) {
  ItemPartition partition;
  partition.is_short_head = ParseLabels(text, items, "short", "long");
  for (size_t i = 0; i < partition.is_short_head.size(); ++i) {
    (partition.is_short_head[i] ? partition.short_head : partition.long_tail)
        .push_back(static_cast<int>(i));
  }
  if (!partition.is_short_head.empty()) {
    partition.fraction = static_cast<double>(partition.short_head.size()) /
                         partition.is_short_head.size();
  }
  return partition;
}

}  // namespace fairrank
