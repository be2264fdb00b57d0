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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fairrank {

enum class FeedbackSchema { kExplicit, kImplicit };

FeedbackSchema ParseSchema(std::string_view name);

struct RawInteraction {
  std::string user_id;
  std::string item_id;
  std::optional<double> rating;
  std::optional<int64_t> timestamp;
};

// Bidirectional external-id <-> dense-index map. Indices are assigned in
// first-seen order.
class IdMap {
 public:
  IdMap() = default;
  explicit IdMap(std::vector<std::string> ids);

  int Intern(std::string_view id);
  std::optional<int> Find(std::string_view id) const;
  const std::string& External(int index) const { return ids_[index]; }
  int size() const { return static_cast<int>(ids_.size()); }
  const std::vector<std::string>& ids() const { return ids_; }

  bool operator==(const IdMap& other) const { return ids_ == other.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
};

struct Interaction {
  int user = 0;
  int item = 0;
  double rating = 1.0;

  bool operator==(const Interaction&) const = default;
};

// Duplicate-free user-item feedback log over dense indices.
struct InteractionSet {
  IdMap users;
  IdMap items;
  std::vector<Interaction> interactions;

  int n_users() const { return users.size(); }
  int n_items() const { return items.size(); }
  size_t size() const { return interactions.size(); }
  bool empty() const { return interactions.empty(); }

  // 1 - |P| / (|U| |I|); 1 for an empty catalog.
  double Sparsity() const;

  std::vector<int> UserDegrees() const;
  std::vector<int> ItemDegrees() const;

  // Items of each user in log order.
  std::vector<std::vector<int>> ItemsByUser() const;
  // Same, sorted ascending for binary search.
  std::vector<std::vector<int>> SortedItemsByUser() const;

  bool operator==(const InteractionSet&) const = default;
};

// Builds a dense set from raw rows. Later duplicates of a (user, item) pair
// overwrite the rating of the first occurrence. Implicit schemas load every
// rating as 1.0.
InteractionSet BuildInteractionSet(std::span<const RawInteraction> rows,
                                   FeedbackSchema schema);

// Parses `user<d>item[<d>rating[<d>timestamp]]` lines; `#` lines and blank
// lines are skipped. Throws Error(kParse) naming the 1-based line number.
std::vector<RawInteraction> ParseInteractions(std::istream& in,
                                              FeedbackSchema schema,
                                              char delimiter);

// Throws Error(kEmptyDataset) when the file holds no interactions.
InteractionSet LoadInteractions(const std::filesystem::path& path,
                                FeedbackSchema schema, char delimiter = '\t');

// Tab-separated dump using external ids.
std::string FormatInteractions(const InteractionSet& data);

// Iteratively peels users and items with fewer than k interactions until a
// fixed point; indices are recompacted preserving relative order.
InteractionSet KCoreFilter(const InteractionSet& data, int k);

struct DataSplit {
  InteractionSet train;
  InteractionSet test;
  uint64_t seed = 0;
};

// Per-user random holdout: floor(test_fraction * degree) interactions go to
// test, capped so that every user keeps at least one train interaction. Train
// and test share the id maps of `data`.
DataSplit SplitHoldout(const InteractionSet& data, double test_fraction,
                       uint64_t seed);

// users.tsv, items.tsv, train.tsv, test.tsv under `dir`.
void SaveSplit(const DataSplit& split, const std::filesystem::path& dir);
DataSplit LoadSplit(const std::filesystem::path& dir);

struct PopularityTable {
  std::vector<int64_t> counts;
  int total_users = 0;

  int64_t Total() const;
};

PopularityTable Popularity(const InteractionSet& data);

struct SyntheticParams {
  int n_users = 300;
  int n_items = 200;
  int rank = 4;
  double density = 0.05;
  double popularity_skew = 1.0;
  uint64_t seed = 0;
};

// Low-rank latent preferences combined with a power-law item exposure
// weight (index rank)^-skew. Users draw log-normally spread shares of
// round(density * |U| * |I|) items without replacement, with running item
// counts steered toward the exposure profile. Implicit ratings.
InteractionSet GenerateSynthetic(const SyntheticParams& params);

}  // namespace fairrank
