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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fairrank/grouping.h"
#include "fairrank/ingest.h"

namespace fairrank {

using ItemSet = std::unordered_set<int>;
using RecLists = std::vector<std::vector<int>>;

// Ground-truth relevant items per user, from the test split.
struct RelevanceOracle {
  std::vector<ItemSet> relevant;

  bool Evaluable(int user) const { return !relevant[user].empty(); }
};

// Explicit schemas keep test items with rating >= threshold; pass a
// threshold <= the smallest rating (or use implicit data) to keep all.
RelevanceOracle BuildRelevanceOracle(const InteractionSet& test,
                                     double threshold);

// Binary-gain NDCG@K; 0 when `relevant` is empty.
double NdcgAtK(std::span<const int> reclist, const ItemSet& relevant, int k);

// Harmonic mean of precision@K and recall@K; 0 when both vanish.
double F1AtK(std::span<const int> reclist, const ItemSet& relevant, int k);

// Signed mean over advantaged minus mean over disadvantaged users. When
// `include` is non-empty only flagged users enter the means. Throws
// kDegenerateGrouping if either side ends up empty.
double Ugf(std::span<const double> per_user, const Grouping& grouping,
           std::span<const char> include = {});

struct Improvement {
  double percent = 0.0;
  bool defined = true;
};

// (|org| - |fair|) / |org| * 100. Reported as 0 with defined = false when
// org is zero.
Improvement UgfImprovement(double ugf_org, double ugf_fair);

struct GapResult {
  double value = 0.0;
  int excluded = 0;  // group members with an empty list
};

// Mean over group members of the mean popularity of their list.
GapResult Gap(const RecLists& lists, const PopularityTable& pop,
              std::span<const int> group);

// (rec - profile) / profile; nullopt when profile is not positive.
std::optional<double> DeltaGap(double gap_rec, double gap_profile);

// Mean self-information -log2(phi(i) / |U|) over all slots; phi < 1 is
// clamped to 1.
double Novelty(const RecLists& lists, const PopularityTable& pop);

// Percentage of the catalog recommended at least once.
double Coverage(const RecLists& lists, int n_items);

struct Exposure {
  int64_t short_slots = 0;
  int64_t long_slots = 0;
};

Exposure ExposureCounts(const RecLists& lists, const ItemPartition& partition);

struct Correlation {
  double r = 0.0;
  double p = 1.0;
  int n = 0;
};

// Sample Pearson r with a two-sided t-test p-value on n - 2 degrees of
// freedom. Throws kPrecondition for mismatched or too-short inputs; returns
// nullopt when either input has zero variance.
std::optional<Correlation> Pearson(std::span<const double> x,
                                   std::span<const double> y);

enum class Stage { kOrg, kFair };

std::string_view StageName(Stage stage);

// One Org or Fair row of the results table.
struct MetricReport {
  std::string model;
  Stage stage = Stage::kOrg;
  double ndcg_all = 0.0;
  double ndcg_adv = 0.0;
  double ndcg_dis = 0.0;
  double ugf = 0.0;
  std::optional<double> delta_pct;  // Fair rows only
  double f1_all = 0.0;
  double novelty = 0.0;
  double coverage_pct = 0.0;
  int64_t short_slots = 0;
  int64_t long_slots = 0;
  double dgap_adv = 0.0;  // x100
  double dgap_dis = 0.0;  // x100

  bool operator==(const MetricReport&) const = default;
};

struct EvaluationInput {
  const RecLists* lists = nullptr;
  const RelevanceOracle* oracle = nullptr;
  const Grouping* grouping = nullptr;
  const ItemPartition* partition = nullptr;
  const PopularityTable* popularity = nullptr;  // from train
  const InteractionSet* train = nullptr;        // profiles for GAP
  int k = 10;
};

// User-relevance means run over users with at least one relevant test item;
// exposure statistics run over every user's list.
MetricReport Evaluate(const EvaluationInput& input, std::string model,
                      Stage stage);

// Column order: model, stage, ndcg_all, ndcg_adv, ndcg_dis, ugf, delta_pct,
// novelty, coverage_pct, short_slots, long_slots, dgap_adv, dgap_dis.
std::string ReportCsvHeader();
std::string FormatReportCsvRow(const MetricReport& report);
std::string FormatReportCsv(std::span<const MetricReport> reports);
std::vector<MetricReport> ParseReportCsv(std::string_view text);

}  // namespace fairrank
