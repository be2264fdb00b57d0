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

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fairrank/ingest.h"

namespace fairrank {

struct Candidate {
  int item = 0;
  double score = 0.0;

  bool operator==(const Candidate&) const = default;
};

// Per-user score-sorted candidate items, indexed by dense user index.
struct CandidateLists {
  std::vector<std::vector<Candidate>> lists;
  int k_target = 10;
  std::string provenance;

  int n_users() const { return static_cast<int>(lists.size()); }
  size_t TotalSlots() const;
  // Item indices only, in list order.
  std::vector<std::vector<int>> Items() const;

  bool operator==(const CandidateLists&) const = default;
};

// Orders by descending score, then ascending item index.
inline bool CandidateBefore(const Candidate& a, const Candidate& b) {
  return a.score > b.score || (a.score == b.score && a.item < b.item);
}

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual int n_users() const = 0;
  virtual int n_items() const = 0;
  // Writes the score of every item for `user` into `out` (size n_items()).
  virtual void ScoreUser(int user, std::span<double> out) const = 0;
};

// Dot-product scorer: score(u, i) = <p_u, q_i> + b_u + b_i. A dimension of
// zero with an item bias expresses the popularity baseline.
class FactorModel : public Scorer {
 public:
  using Matrix =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  std::string name;
  uint64_t seed = 0;
  Matrix user_factors;
  Matrix item_factors;
  Eigen::VectorXd user_bias;  // empty when absent
  Eigen::VectorXd item_bias;  // empty when absent

  int dim() const { return static_cast<int>(user_factors.cols()); }
  int n_users() const override { return static_cast<int>(user_factors.rows()); }
  int n_items() const override { return static_cast<int>(item_factors.rows()); }
  double Score(int user, int item) const;
  void ScoreUser(int user, std::span<double> out) const override;
  bool AllFinite() const;
};

// Per-iteration objective values (BPR loss, WMF objective, PF ELBO).
struct TrainTrace {
  std::vector<double> values;
};

FactorModel TrainMostPop(const InteractionSet& train);

struct BprOptions {
  int dim = 50;
  int epochs = 100;
  double learning_rate = 0.001;
  double reg = 0.01;
  uint64_t seed = 0;
};

// Plain SGD on sampled (u, i+, i-) triples with i- uniform over the user's
// non-interacted items. One epoch draws |P| triples.
FactorModel TrainBpr(const InteractionSet& train, const BprOptions& options,
                     TrainTrace* trace = nullptr);

struct WmfOptions {
  int dim = 50;
  int iterations = 30;
  double confidence_alpha = 10.0;
  double reg = 50.0;
  uint64_t seed = 0;
  int threads = 1;
};

// Implicit-feedback ALS with confidence 1 + alpha * r on observed cells and
// 1 elsewhere. trace->values[0] is the objective at initialization, then one
// value per sweep.
FactorModel TrainWmf(const InteractionSet& train, const WmfOptions& options,
                     TrainTrace* trace = nullptr);

// Objective minimized by TrainWmf.
double WmfObjective(const InteractionSet& train, const FactorModel& model,
                    double confidence_alpha, double reg);

struct PfOptions {
  int dim = 50;
  int iterations = 30;
  double prior_shape = 0.3;
  double prior_rate = 0.3;
  // Independent random starts compared after a short warm-up.
  int restarts = 4;
  uint64_t seed = 0;
  int threads = 1;
};

// Gamma-Poisson factorization fit by coordinate-ascent variational
// inference. The returned factors are posterior means.
FactorModel TrainPf(const InteractionSet& train, const PfOptions& options,
                    TrainTrace* trace = nullptr);

// Top-n unseen items per user, ties by ascending item index.
CandidateLists PredictTopN(const Scorer& model, const InteractionSet& train,
                           int n, int threads = 1);

// Score file: `user<TAB>item<TAB>score` per line. Unknown ids raise
// Error(kResolution) listing the offending tokens.
CandidateLists ParseScores(std::istream& in, const InteractionSet& data,
                           int n);
CandidateLists ImportScores(const std::filesystem::path& path,
                            const InteractionSet& data, int n);
std::string FormatScores(const CandidateLists& candidates,
                         const InteractionSet& data);

void SaveModel(const FactorModel& model, const std::filesystem::path& path);
FactorModel LoadModel(const std::filesystem::path& path);

}  // namespace fairrank
