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

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairrank/error.h"
#include "fairrank/grouping.h"
#include "fairrank/ingest.h"
#include "fairrank/metrics.h"
#include "fairrank/rankers.h"

namespace fairrank {

// Feasibility slack on |estimated UGF| <= epsilon.
inline constexpr double kFeasibilityTol = 1e-9;

// How base scores become estimated relevance gains in [0, 1].
//
// kPerUserMinMax: min-max within each user's list, normalized by the DCG of
//   the user's own top-K gains. The unconstrained top-K then has estimated
//   NDCG 1 for every user, so the identity selection is always feasible.
// kGlobalMinMax: min-max over all users' candidate scores, normalized by the
//   DCG of K fully relevant items.
// kCalibrated: hit rates measured on a validation split of the training
//   data (see GainCalibration). The gain at candidate rank j is
//   min(1, c_b * h[j]) with unit normalizer, where h[j] is the mean NDCG
//   contribution of a hit at rank j and c_b rescales it to the observed
//   NDCG level of the user's activity bucket b.
enum class GainModel { kPerUserMinMax, kGlobalMinMax, kCalibrated };

GainModel ParseGainModel(std::string_view name);
std::string_view GainModelName(GainModel model);

struct UserCandidates {
  std::vector<Candidate> candidates;  // CandidateBefore order
  std::vector<double> gains;          // aligned with candidates
  double idcg = 1.0;
  bool advantaged = false;
};

// One instance of the fairness-constrained top-K selection program:
// maximize the summed base score of the selected items subject to
// |mean est. NDCG(adv) - mean est. NDCG(dis)| <= epsilon.
struct RerankProblem {
  std::vector<UserCandidates> users;
  int k = 10;
  double epsilon = 0.0;
  int n_advantaged = 0;
  int n_disadvantaged = 0;

  int n_users() const { return static_cast<int>(users.size()); }
  // Signed weight of user u's DCG in the estimated UGF:
  // +1 / (idcg |G_adv|) for advantaged, -1 / (idcg |G_dis|) otherwise.
  double UgfWeight(int user) const;
};

// Validates and completes a problem from explicit gains. When `idcg` is
// empty each user's normalizer is the DCG of its top-K gains. Throws
// kInfeasibleProblem naming the first user with fewer than K candidates.
RerankProblem MakeProblem(std::vector<std::vector<Candidate>> candidates,
                          std::vector<std::vector<double>> gains,
                          std::vector<char> advantaged, int k, double epsilon,
                          std::vector<double> idcg = {});

struct GainCalibration {
  std::vector<double> expected_relevant;  // per user; selects the bucket
  std::vector<double> rank_gain;          // per candidate rank
  std::vector<double> bucket_upper;       // ascending; last is +inf
  std::vector<double> bucket_scale;       // per bucket

  // Bucket of a user expected to have m relevant held-out items.
  int Bucket(double m) const;
};

// f / (1 - f) times the number of train items rated >= threshold.
std::vector<double> ExpectedRelevantCounts(const InteractionSet& train,
                                           double test_fraction,
                                           double threshold);

// Fits a calibration from candidate lists scored against held-out relevance.
// Only users with a relevant item count. rank_gain[j] is the mean of
// [candidate j relevant] / IDCG_u, with IDCG_u the ideal DCG of
// min(K, |relevant_u|) items. Users are cut into `buckets` equal-count
// groups by `expected`; a bucket's scale is its mean top-K NDCG over the
// pooled mean. `expected_relevant` is left for the caller to fill.
GainCalibration FitCalibration(const CandidateLists& candidates,
                               const std::vector<ItemSet>& relevant,
                               std::span<const double> expected, int k,
                               int buckets = 4);

// `calibration` is required for kCalibrated and ignored otherwise.
RerankProblem BuildProblem(const CandidateLists& candidates,
                           const Grouping& grouping, int k, double epsilon,
                           GainModel gain_model = GainModel::kPerUserMinMax,
                           const GainCalibration* calibration = nullptr);

enum class SolverKind { kIdentity, kLagrangian, kBruteForce };

std::string_view SolverName(SolverKind kind);

struct Selection {
  // Per user, K ascending positions into that user's candidate list, which
  // is descending base-score order.
  std::vector<std::vector<int>> positions;
  double objective = 0.0;
  double est_ugf = 0.0;
  SolverKind solver = SolverKind::kIdentity;
  std::optional<double> lambda_star;
  bool violation = false;
  int iterations = 0;

  std::vector<int> Items(const RerankProblem& problem, int user) const;
};

// Estimated NDCG of the listed positions (ascending) for `user`.
double EstimatedNdcg(const RerankProblem& problem, int user,
                     std::span<const int> positions);
double EstimatedUgf(const RerankProblem& problem,
                    const std::vector<std::vector<int>>& positions);
double SelectionObjective(const RerankProblem& problem,
                          const std::vector<std::vector<int>>& positions);
// Recomputes objective and est_ugf from positions.
void Rescore(const RerankProblem& problem, Selection& selection);
bool IsFeasible(const RerankProblem& problem, const Selection& selection);

// Unconstrained top-K by base score.
Selection SolveIdentity(const RerankProblem& problem);

struct UserDpResult {
  std::vector<int> positions;
  double value = 0.0;
};

// Exact maximizer of sum(score) - lambda * UgfWeight(u) * DCG(u) over
// K-subsets, by DP over (candidate, slots filled). Ties prefer earlier
// candidates, so lambda = 0 yields the top-K prefix.
UserDpResult PerUserDp(const RerankProblem& problem, int user, double lambda);

struct LagrangianOptions {
  int max_bisection_iters = 60;
  double tol = 1e-6;
  int threads = 1;
};

// Thrown when no selection within epsilon was found. Carries the closest
// selection (flagged as a violation) and its |estimated UGF|.
class InfeasibleEpsilonError : public Error {
 public:
  InfeasibleEpsilonError(const std::string& message, Selection best)
      : Error(ErrorCode::kInfeasibleEpsilon, message), best_(std::move(best)) {}

  const Selection& best() const { return best_; }
  double min_abs_ugf() const { return std::abs(best_.est_ugf); }

 private:
  Selection best_;
};

// Dual bisection on the violated side of the fairness constraint followed by
// swap repair. Returns the identity when it already satisfies epsilon.
Selection SolveLagrangian(const RerankProblem& problem,
                          const LagrangianOptions& options = {});

// Greedy single-item swaps ranked by objective loss per unit reduction of
// |estimated UGF|; every accepted swap strictly reduces |estimated UGF|.
// Sets `violation` if it stops above epsilon.
Selection RepairSwap(Selection selection, const RerankProblem& problem);

// Exhaustive search over joint selections; throws kSizeGuard when the
// product of per-user subset counts exceeds `max_joint_selections`.
Selection BruteForceSolve(const RerankProblem& problem,
                          double max_joint_selections = 1e7);

// Selected candidates per user in descending base-score order.
CandidateLists ApplySelection(const Selection& selection,
                              const RerankProblem& problem,
                              std::string provenance = "");

// Versioned text dump of a problem (dense item indices).
std::string FormatProblem(const RerankProblem& problem);
RerankProblem ParseProblem(std::string_view text);

}  // namespace fairrank
