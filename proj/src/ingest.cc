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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "fairrank/error.h"
#include "fairrank/util.h"

namespace fairrank {

FeedbackSchema ParseSchema(std::string_view name) {
  if (name == "explicit") return FeedbackSchema::kExplicit;
  if (name == "implicit") return FeedbackSchema::kImplicit;
  throw Error(ErrorCode::kConfig,
              "unknown schema '" + std::string(name) + "'");
}

IdMap::IdMap(std::vector<std::string> ids) {
  for (auto& id : ids) Intern(id);
}

int IdMap::Intern(std::string_view id) {
  auto it = index_.find(std::string(id));
  if (it != index_.end()) return it->second;
  const int index = static_cast<int>(ids_.size());
  ids_.emplace_back(id);
  index_.emplace(ids_.back(), index);
  return index;
}

std::optional<int> IdMap::Find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double InteractionSet::Sparsity() const {
  const double cells = static_cast<double>(n_users()) * n_items();
  if (cells <= 0) return 1.0;
  return 1.0 - static_cast<double>(size()) / cells;
}

std::vector<int> InteractionSet::UserDegrees() const {
  std::vector<int> degree(n_users(), 0);
  for (const auto& x : interactions) ++degree[x.user];
  return degree;
}

std::vector<int> InteractionSet::ItemDegrees() const {
  std::vector<int> degree(n_items(), 0);
  for (const auto& x : interactions) ++degree[x.item];
  return degree;
}

std::vector<std::vector<int>> InteractionSet::ItemsByUser() const {
  std::vector<std::vector<int>> by_user(n_users());
  for (const auto& x : interactions) by_user[x.user].push_back(x.item);
  return by_user;
}

std::vector<std::vector<int>> InteractionSet::SortedItemsByUser() const {
  auto by_user = ItemsByUser();
  for (auto& items : by_user) std::sort(items.begin(), items.end());
  return by_user;
}

namespace {

uint64_t PairKey(int user, int item) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(user)) << 32) |
         static_cast<uint32_t>(item);
}

}  // namespace

InteractionSet BuildInteractionSet(std::span<const RawInteraction> rows,
                                   FeedbackSchema schema) {
  InteractionSet data;
  std::unordered_map<uint64_t, size_t> position;
  position.reserve(rows.size());
  for (const auto& row : rows) {
    const int user = data.users.Intern(row.user_id);
    const int item = data.items.Intern(row.item_id);
    const double rating = schema == FeedbackSchema::kImplicit
                              ? 1.0
                              : row.rating.value_or(1.0);
    auto [it, inserted] =
        position.emplace(PairKey(user, item), data.interactions.size());
    if (inserted) {
      data.interactions.push_back({user, item, rating});
    } else {
      data.interactions[it->second].rating = rating;
    }
  }
  return data;
}

std::vector<RawInteraction> ParseInteractions(std::istream& in,
                                              FeedbackSchema schema,
                                              char delimiter) {
  std::vector<RawInteraction> rows;
  std::string line;
  int64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string context = "line " + std::to_string(line_number);
    auto fields = SplitFields(line, delimiter);
    if (fields.size() < 2 || fields.size() > 4) {
      throw Error(ErrorCode::kParse,
                  context + ": expected 2-4 fields, got " +
                      std::to_string(fields.size()));
    }
    RawInteraction row;
    row.user_id = std::string(fields[0]);
    row.item_id = std::string(fields[1]);
    if (row.user_id.empty() || row.item_id.empty()) {
      throw Error(ErrorCode::kParse, context + ": empty user or item id");
    }
    if (fields.size() >= 3) {
      const double rating = ParseDouble(fields[2], context);
      if (!std::isfinite(rating)) {
        throw Error(ErrorCode::kParse, context + ": non-finite rating");
      }
      row.rating = rating;
    } else if (schema == FeedbackSchema::kExplicit) {
      throw Error(ErrorCode::kParse,
                  context + ": explicit schema requires a rating field");
    }
    if (fields.size() == 4) row.timestamp = ParseInt(fields[3], context);
    rows.push_back(std::move(row));
  }
  return rows;
}

InteractionSet LoadInteractions(const std::filesystem::path& path,
                                FeedbackSchema schema, char delimiter) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const auto rows = ParseInteractions(in, schema, delimiter);
  if (rows.empty()) {
    throw Error(ErrorCode::kEmptyDataset,
                path.string() + ": no interactions");
  }
  return BuildInteractionSet(rows, schema);
}

std::string FormatInteractions(const InteractionSet& data) {
  std::string out;
  for (const auto& x : data.interactions) {
    out += data.users.External(x.user);
    out += '\t';
    out += data.items.External(x.item);
    out += '\t';
    out += FormatDouble(x.rating);
    out += '\n';
  }
  return out;
}

InteractionSet KCoreFilter(const InteractionSet& data, int k) {
  Require(k >= 1, "k-core requires k >= 1");
  std::vector<char> user_alive(data.n_users(), 1);
  std::vector<char> item_alive(data.n_items(), 1);
  std::vector<char> edge_alive(data.size(), 1);
  size_t alive_edges = data.size();
  int round = 0;
  size_t last_nonempty = alive_edges;
  while (true) {
    std::vector<int> user_degree(data.n_users(), 0);
    std::vector<int> item_degree(data.n_items(), 0);
    for (size_t e = 0; e < data.size(); ++e) {
      if (!edge_alive[e]) continue;
      ++user_degree[data.interactions[e].user];
      ++item_degree[data.interactions[e].item];
    }
    bool changed = false;
    for (int u = 0; u < data.n_users(); ++u) {
      if (user_alive[u] && user_degree[u] < k) {
        user_alive[u] = 0;
        changed = true;
      }
    }
    for (int i = 0; i < data.n_items(); ++i) {
      if (item_alive[i] && item_degree[i] < k) {
        item_alive[i] = 0;
        changed = true;
      }
    }
    if (!changed) break;
    ++round;
    for (size_t e = 0; e < data.size(); ++e) {
      const auto& x = data.interactions[e];
      if (edge_alive[e] && (!user_alive[x.user] || !item_alive[x.item])) {
        edge_alive[e] = 0;
        --alive_edges;
      }
    }
    if (alive_edges == 0) {
      throw Error(ErrorCode::kEmptyAfterFilter,
                  std::to_string(k) + "-core is empty; round " +
                      std::to_string(round - 1) + " still held " +
                      std::to_string(last_nonempty) + " interactions");
    }
    last_nonempty = alive_edges;
  }

  InteractionSet out;
  std::vector<int> user_remap(data.n_users(), -1);
  std::vector<int> item_remap(data.n_items(), -1);
  // Recompact in original index order so first-seen order is preserved.
  for (int u = 0; u < data.n_users(); ++u) {
    if (user_alive[u]) user_remap[u] = out.users.Intern(data.users.External(u));
  }
  for (int i = 0; i < data.n_items(); ++i) {
    if (item_alive[i]) item_remap[i] = out.items.Intern(data.items.External(i));
  }
  out.interactions.reserve(alive_edges);
  for (size_t e = 0; e < data.size(); ++e) {
    if (!edge_alive[e]) continue;
    const auto& x = data.interactions[e];
    out.interactions.push_back({user_remap[x.user], item_remap[x.item],
                                x.rating});
  }
  return out;
}

DataSplit SplitHoldout(const InteractionSet& data, double test_fraction,
                       uint64_t seed) {
  Require(test_fraction > 0.0 && test_fraction < 1.0,
          "test_fraction must lie in (0, 1)");
  std::vector<std::vector<size_t>> edges_by_user(data.n_users());
  for (size_t e = 0; e < data.size(); ++e) {
    edges_by_user[data.interactions[e].user].push_back(e);
  }
  std::vector<char> in_test(data.size(), 0);
  for (int u = 0; u < data.n_users(); ++u) {
    auto& edges = edges_by_user[u];
    const size_t degree = edges.size();
    if (degree <= 1) continue;
    // Per-user stream so a user's split does not depend on other users.
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<uint64_t>(u) + 1)));
    Shuffle(edges, rng);
    size_t n_test = static_cast<size_t>(
        std::floor(test_fraction * static_cast<double>(degree) + 1e-9));
    n_test = std::min(n_test, degree - 1);
    for (size_t j = 0; j < n_test; ++j) in_test[edges[j]] = 1;
  }
  DataSplit split;
  split.seed = seed;
  split.train.users = split.test.users = data.users;
  split.train.items = split.test.items = data.items;
  for (size_t e = 0; e < data.size(); ++e) {
    (in_test[e] ? split.test : split.train)
        .interactions.push_back(data.interactions[e]);
  }
  return split;
}

namespace {

std::string FormatIds(const IdMap& ids) {
  std::string out;
  for (const auto& id : ids.ids()) {
    out += id;
    out += '\n';
  }
  return out;
}

IdMap ReadIds(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ids.push_back(line);
  }
  return IdMap(std::move(ids));
}

std::vector<Interaction> ReadResolved(const std::filesystem::path& path,
                                      const IdMap& users, const IdMap& items) {
  std::istringstream in(ReadFile(path));
  const auto rows = ParseInteractions(in, FeedbackSchema::kImplicit, '\t');
  std::vector<Interaction> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    auto u = users.Find(row.user_id);
    auto i = items.Find(row.item_id);
    if (!u || !i) {
      throw Error(ErrorCode::kResolution,
                  path.string() + ": unknown id '" +
                      (!u ? row.user_id : row.item_id) + "'");
    }
    out.push_back({*u, *i, row.rating.value_or(1.0)});
  }
  return out;
}

}  // namespace

void SaveSplit(const DataSplit& split, const std::filesystem::path& dir) {
  WriteFileAtomic(dir / "users.tsv", FormatIds(split.train.users));
  WriteFileAtomic(dir / "items.tsv", FormatIds(split.train.items));
  WriteFileAtomic(dir / "train.tsv", FormatInteractions(split.train));
  WriteFileAtomic(dir / "test.tsv", FormatInteractions(split.test));
  WriteFileAtomic(dir / "seed.txt", std::to_string(split.seed) + "\n");
}

DataSplit LoadSplit(const std::filesystem::path& dir) {
  DataSplit split;
  split.train.users = split.test.users = ReadIds(dir / "users.tsv");
  split.train.items = split.test.items = ReadIds(dir / "items.tsv");
  split.train.interactions =
      ReadResolved(dir / "train.tsv", split.train.users, split.train.items);
  split.test.interactions =
      ReadResolved(dir / "test.tsv", split.train.users, split.train.items);
  if (std::filesystem::exists(dir / "seed.txt")) {
    std::string text = ReadFile(dir / "seed.txt");
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
      text.pop_back();
    }
    split.seed = static_cast<uint64_t>(ParseInt(text, "seed.txt"));
  }
  return split;
}

int64_t PopularityTable::Total() const {
  return std::accumulate(counts.begin(), counts.end(), int64_t{0});
}

PopularityTable Popularity(const InteractionSet& data) {
  PopularityTable table;
  table.counts.assign(data.n_items(), 0);
  table.total_users = data.n_users();
  for (const auto& x : data.interactions) ++table.counts[x.item];
  return table;
}

InteractionSet GenerateSynthetic(const SyntheticParams& params) {
  Require(params.n_users >= 1 && params.n_items >= 1,
          "synthetic data needs at least one user and item");
  Require(params.rank >= 1 &&
              params.rank <= std::min(params.n_users, params.n_items),
          "rank must lie in [1, min(n_users, n_items)]");
  Require(params.density > 0.0 && params.density <= 1.0,
          "density must lie in (0, 1]");
  Require(params.popularity_skew >= 0.0, "popularity_skew must be >= 0");

  Rng rng(params.seed);
  const int nu = params.n_users;
  const int ni = params.n_items;
  const int r = params.rank;
  // Latent factors scaled so that the preference logit has unit variance
  // times kSignal.
  constexpr double kSignal = 3.0;
  constexpr double kActivitySpread = 0.75;
  constexpr double kBalance = 3.0;
  std::vector<double> user_factors(static_cast<size_t>(nu) * r);
  std::vector<double> item_factors(static_cast<size_t>(ni) * r);
  for (auto& v : user_factors) v = StandardNormal(rng);
  for (auto& v : item_factors) v = StandardNormal(rng);

  std::vector<int> exposure_rank(ni);
  std::iota(exposure_rank.begin(), exposure_rank.end(), 0);
  Shuffle(exposure_rank, rng);
  std::vector<double> log_exposure(ni);
  for (int i = 0; i < ni; ++i) {
    log_exposure[i] =
        -params.popularity_skew * std::log(exposure_rank[i] + 1.0);
  }

  std::vector<int> degree(nu, ni);
  if (params.density < 1.0) {
    std::vector<double> activity(nu);
    double total_activity = 0.0;
    for (auto& a : activity) {
      a = std::exp(kActivitySpread * StandardNormal(rng));
      total_activity += a;
    }
    const double total = std::round(params.density * nu * ni);
    for (int u = 0; u < nu; ++u) {
      const double share = total * activity[u] / total_activity;
      degree[u] = std::clamp(static_cast<int>(std::lround(share)), 1, ni);
    }
  }

  InteractionSet data;
  for (int u = 0; u < nu; ++u) data.users.Intern("u" + std::to_string(u));
  for (int i = 0; i < ni; ++i) data.items.Intern("i" + std::to_string(i));
  const double scale = kSignal / std::sqrt(static_cast<double>(r));
  // Target share of each item; a feedback term steers running counts
  // toward it so item popularity follows the exposure profile instead of
  // the random spread of latent factor norms.
  std::vector<double> target(ni);
  double exposure_total = 0.0;
  for (int i = 0; i < ni; ++i) {
    target[i] = std::exp(log_exposure[i]);
    exposure_total += target[i];
  }
  for (auto& t : target) t /= exposure_total;
  std::vector<double> counts(ni, 0.0);
  double drawn = 0.0;
  std::vector<std::pair<double, int>> keys(ni);
  for (int u = 0; u < nu; ++u) {
    // Gumbel-top-k draws degree[u] items without replacement with
    // probabilities proportional to exposure * exp(preference).
    for (int i = 0; i < ni; ++i) {
      double logit = 0.0;
      for (int f = 0; f < r; ++f) {
        logit += user_factors[static_cast<size_t>(u) * r + f] *
                 item_factors[static_cast<size_t>(i) * r + f];
      }
      double unit;
      do {
        unit = UniformUnit(rng);
      } while (unit <= 0.0);
      const double gumbel = -std::log(-std::log(unit));
      const double balance =
          -kBalance * std::log((counts[i] + 1.0) / (target[i] * drawn + 1.0));
      keys[i] = {log_exposure[i] + scale * logit + gumbel + balance, i};
    }
    std::partial_sort(keys.begin(), keys.begin() + degree[u], keys.end(),
                      [](const auto& a, const auto& b) {
                        return a.first > b.first ||
                               (a.first == b.first && a.second < b.second);
                      });
    std::vector<int> chosen(degree[u]);
    for (int j = 0; j < degree[u]; ++j) chosen[j] = keys[j].second;
    std::sort(chosen.begin(), chosen.end());
    for (int item : chosen) {
      data.interactions.push_back({u, item, 1.0});
      counts[item] += 1.0;
    }
    drawn += degree[u];
  }
  return data;
}

}  // namespace fairrank
