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

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <sstream>

#include "fairrank/error.h"
#include "fairrank/util.h"

namespace fairrank {

RelevanceOracle BuildRelevanceOracle(const InteractionSet& test,
                                     double threshold) {
  RelevanceOracle oracle;
  oracle.relevant.resize(test.n_users());
  for (const auto& x : test.interactions) {
    if (x.rating >= threshold) oracle.relevant[x.user].insert(x.item);
  }
  return oracle;
}

double NdcgAtK(std::span<const int> reclist, const ItemSet& relevant, int k) {
  Require(k >= 1, "NDCG requires K >= 1");
  if (relevant.empty()) return 0.0;
  double dcg = 0.0;
  const size_t depth = std::min<size_t>(k, reclist.size());
  for (size_t p = 0; p < depth; ++p) {
    if (relevant.count(reclist[p])) dcg += 1.0 / std::log2(p + 2.0);
  }
  double idcg = 0.0;
  const size_t ideal = std::min<size_t>(k, relevant.size());
  for (size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(p + 2.0);
  return dcg / idcg;
}

double F1AtK(std::span<const int> reclist, const ItemSet& relevant, int k) {
  Require(k >= 1, "F1 requires K >= 1");
  if (relevant.empty()) return 0.0;
  const size_t depth = std::min<size_t>(k, reclist.size());
  int hits = 0;
  for (size_t p = 0; p < depth; ++p) hits += relevant.count(reclist[p]) ? 1 : 0;
  if (hits == 0) return 0.0;
  const double precision = static_cast<double>(hits) / k;
  const double recall = static_cast<double>(hits) / relevant.size();
  return 2.0 * precision * recall / (precision + recall);
}

double Ugf(std::span<const double> per_user, const Grouping& grouping,
           std::span<const char> include) {
  Require(per_user.size() >= static_cast<size_t>(grouping.n_users()),
          "per-user metric does not cover the grouping");
  auto group_mean = [&](const std::vector<int>& members, const char* name) {
    CompensatedSum sum;
    int count = 0;
    for (int u : members) {
      if (!include.empty() && !include[u]) continue;
      sum.Add(per_user[u]);
      ++count;
    }
    if (count == 0) {
      throw Error(ErrorCode::kDegenerateGrouping,
                  std::string("no evaluable users in the ") + name + " group");
    }
    return sum.Value() / count;
  };
  return group_mean(grouping.advantaged, "advantaged") -
         group_mean(grouping.disadvantaged, "disadvantaged");
}

Improvement UgfImprovement(double ugf_org, double ugf_fair) {
  if (ugf_org == 0.0) return {0.0, false};
  return {(std::abs(ugf_org) - std::abs(ugf_fair)) / std::abs(ugf_org) * 100.0,
          true};
}

GapResult Gap(const RecLists& lists, const PopularityTable& pop,
              std::span<const int> group) {
  Require(!group.empty(), "GAP requires a non-empty group");
  GapResult result;
  CompensatedSum outer;
  int counted = 0;
  for (int u : group) {
    const auto& list = lists[u];
    if (list.empty()) {
      ++result.excluded;
      continue;
    }
    CompensatedSum inner;
    for (int item : list) inner.Add(static_cast<double>(pop.counts[item]));
    outer.Add(inner.Value() / list.size());
    ++counted;
  }
  result.value = counted > 0 ? outer.Value() / counted : 0.0;
  return result;
}

std::optional<double> DeltaGap(double gap_rec, double gap_profile) {
  if (!(gap_profile > 0.0)) return std::nullopt;
  return (gap_rec - gap_profile) / gap_profile;
}

double Novelty(const RecLists& lists, const PopularityTable& pop) {
  CompensatedSum sum;
  int64_t slots = 0;
  const double users = std::max(1, pop.total_users);
  for (const auto& list : lists) {
    for (int item : list) {
      const double phi = std::max<double>(1.0, pop.counts[item]);
      sum.Add(-std::log2(phi / users));
      ++slots;
    }
  }
  return slots > 0 ? sum.Value() / slots : 0.0;
}

double Coverage(const RecLists& lists, int n_items) {
  if (n_items <= 0) return 0.0;
  std::vector<char> seen(n_items, 0);
  int distinct = 0;
  for (const auto& list : lists) {
    for (int item : list) {
      if (!seen[item]) {
        seen[item] = 1;
        ++distinct;
      }
    }
  }
  return 100.0 * distinct / n_items;
}

Exposure ExposureCounts(const RecLists& lists,
                        const ItemPartition& partition) {
  Exposure exposure;
  for (const auto& list : lists) {
    for (int item : list) {
      if (partition.is_short_head[item]) {
        ++exposure.short_slots;
      } else {
        ++exposure.long_slots;
      }
    }
  }
  return exposure;
}

std::optional<Correlation> Pearson(std::span<const double> x,
                                   std::span<const double> y) {
  Require(x.size() == y.size(), "pearson inputs differ in length");
  Require(x.size() >= 3, "pearson requires at least 3 points");
  const size_t n = x.size();
  CompensatedSum sx, sy;
  for (size_t i = 0; i < n; ++i) {
    sx.Add(x[i]);
    sy.Add(y[i]);
  }
  const double mx = sx.Value() / n;
  const double my = sy.Value() / n;
  CompensatedSum sxy, sxx, syy;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy.Add(dx * dy);
    sxx.Add(dx * dx);
    syy.Add(dy * dy);
  }
  if (!(sxx.Value() > 0.0) || !(syy.Value() > 0.0)) return std::nullopt;
  Correlation c;
  c.n = static_cast<int>(n);
  c.r = std::clamp(sxy.Value() / std::sqrt(sxx.Value() * syy.Value()), -1.0,
                   1.0);
  const double dof = static_cast<double>(n) - 2.0;
  const double one_minus = 1.0 - c.r * c.r;
  if (one_minus <= 0.0) {
    c.p = 0.0;
  } else {
    const double t = std::abs(c.r) * std::sqrt(dof / one_minus);
    boost::math::students_t_distribution<double> dist(dof);
    c.p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
  }
  return c;
}

std::string_view StageName(Stage stage) {
  return stage == Stage::kOrg ? "Org" : "Fair";
}

MetricReport Evaluate(const EvaluationInput& input, std::string model,
                      Stage stage) {
  Require(input.lists && input.oracle && input.grouping && input.partition &&
              input.popularity && input.train,
          "evaluation input is incomplete");
  const RecLists& lists = *input.lists;
  const int n_users = input.grouping->n_users();
  Require(static_cast<int>(lists.size()) == n_users &&
              static_cast<int>(input.oracle->relevant.size()) == n_users,
          "evaluation inputs disagree on the user count");

  MetricReport report;
  report.model = std::move(model);
  report.stage = stage;

  std::vector<double> ndcg(n_users, 0.0);
  std::vector<char> evaluable(n_users, 0);
  CompensatedSum ndcg_sum, f1_sum;
  int n_evaluable = 0;
  for (int u = 0; u < n_users; ++u) {
    if (!input.oracle->Evaluable(u)) continue;
    evaluable[u] = 1;
    ++n_evaluable;
    ndcg[u] = NdcgAtK(lists[u], input.oracle->relevant[u], input.k);
    ndcg_sum.Add(ndcg[u]);
    f1_sum.Add(F1AtK(lists[u], input.oracle->relevant[u], input.k));
  }
  if (n_evaluable > 0) {
    report.ndcg_all = ndcg_sum.Value() / n_evaluable;
    report.f1_all = f1_sum.Value() / n_evaluable;
  }
  auto group_mean = [&](const std::vector<int>& members) {
    CompensatedSum sum;
    int count = 0;
    for (int u : members) {
      if (!evaluable[u]) continue;
      sum.Add(ndcg[u]);
      ++count;
    }
    return count > 0 ? sum.Value() / count : 0.0;
  };
  report.ndcg_adv = group_mean(input.grouping->advantaged);
  report.ndcg_dis = group_mean(input.grouping->disadvantaged);
  report.ugf = Ugf(ndcg, *input.grouping, evaluable);

  report.novelty = Novelty(lists, *input.popularity);
  report.coverage_pct = Coverage(lists, input.train->n_items());
  const Exposure exposure = ExposureCounts(lists, *input.partition);
  report.short_slots = exposure.short_slots;
  report.long_slots = exposure.long_slots;

  const RecLists profiles = input.train->ItemsByUser();
  auto dgap = [&](const std::vector<int>& members) {
    const double rec = Gap(lists, *input.popularity, members).value;
    const double profile = Gap(profiles, *input.popularity, members).value;
    const auto delta = DeltaGap(rec, profile);
    return delta ? *delta * 100.0 : std::numeric_limits<double>::quiet_NaN();
  };
  report.dgap_adv = dgap(input.grouping->advantaged);
  report.dgap_dis = dgap(input.grouping->disadvantaged);
  return report;
}

std::string ReportCsvHeader() {
  return "model,stage,ndcg_all,ndcg_adv,ndcg_dis,ugf,delta_pct,novelty,"
         "coverage_pct,short_slots,long_slots,dgap_adv,dgap_dis";
}

std::string FormatReportCsvRow(const MetricReport& r) {
  std::string row = r.model;
  auto add = [&row](const std::string& cell) {
    row += ',';
    row += cell;
  };
  add(std::string(StageName(r.stage)));
  add(FormatDouble(r.ndcg_all));
  add(FormatDouble(r.ndcg_adv));
  add(FormatDouble(r.ndcg_dis));
  add(FormatDouble(r.ugf));
  add(r.delta_pct ? FormatDouble(*r.delta_pct) : "");
  add(FormatDouble(r.novelty));
  add(FormatDouble(r.coverage_pct));
  add(std::to_string(r.short_slots));
  add(std::to_string(r.long_slots));
  add(FormatDouble(r.dgap_adv));
  add(FormatDouble(r.dgap_dis));
  return row;
}

std::string FormatReportCsv(std::span<const MetricReport> reports) {
  std::string out = ReportCsvHeader() + "\n";
  for (const auto& r : reports) out += FormatReportCsvRow(r) + "\n";
  return out;
}

std::vector<MetricReport> ParseReportCsv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != ReportCsvHeader()) {
    throw Error(ErrorCode::kParse, "report CSV header mismatch");
  }
  std::vector<MetricReport> reports;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string context = "report line " + std::to_string(line_number);
    auto f = SplitFields(line, ',');
    if (f.size() != 13) throw Error(ErrorCode::kParse, context + ": expected 13 columns");
    MetricReport r;
    r.model = std::string(f[0]);
    if (f[1] == "Org") {
      r.stage = Stage::kOrg;
    } else if (f[1] == "Fair") {
      r.stage = Stage::kFair;
    } else {
      throw Error(ErrorCode::kParse, context + ": bad stage");
    }
    r.ndcg_all = ParseDouble(f[2], context);
    r.ndcg_adv = ParseDouble(f[3], context);
    r.ndcg_dis = ParseDouble(f[4], context);
    r.ugf = ParseDouble(f[5], context);
    if (!f[6].empty()) r.delta_pct = ParseDouble(f[6], context);
    r.novelty = ParseDouble(f[7], context);
    r.coverage_pct = ParseDouble(f[8], context);
    r.short_slots = ParseInt(f[9], context);
    r.long_slots = ParseInt(f[10], context);
    r.dgap_adv = ParseDouble(f[11], context);
    r.dgap_dis = ParseDouble(f[12], context);
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace fairrank
