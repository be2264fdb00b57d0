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

#include "fairrank/ufr.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fairrank/util.h"

namespace fairrank {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double Discount(int slot) { return 1.0 / std::log2(slot + 2.0); }

double IdealDcg(std::vector<double> gains, int k) {
  std::sort(gains.begin(), gains.end(), std::greater<>());
  double dcg = 0.0;
  for (int p = 0; p < k && p < static_cast<int>(gains.size()); ++p) {
    dcg += gains[p] * Discount(p);
  }
  return dcg;
}

}  // namespace

GainModel ParseGainModel(std::string_view name) {
  if (name == "per-user-minmax") return GainModel::kPerUserMinMax;
  if (name == "global-minmax") return GainModel::kGlobalMinMax;
  if (name == "calibrated") return GainModel::kCalibrated;
  throw Error(ErrorCode::kConfig, "unknown gain model '" + std::string(name) + "'");
}

std::string_view GainModelName(GainModel model) {
  switch (model) {
    case GainModel::kPerUserMinMax: return "per-user-minmax";
    case GainModel::kGlobalMinMax: return "global-minmax";
    case GainModel::kCalibrated: return "calibrated";
  }
  return "per-user-minmax";
}

std::string_view SolverName(SolverKind kind) {
  switch (kind) {
    case SolverKind::kIdentity: return "identity";
    case SolverKind::kLagrangian: return "lagrangian";
    case SolverKind::kBruteForce: return "brute_force";
  }
  return "identity";
}

double RerankProblem::UgfWeight(int user) const {
  const auto& uc = users[user];
  return uc.advantaged ? 1.0 / (uc.idcg * n_advantaged)
                       : -1.0 / (uc.idcg * n_disadvantaged);
}

RerankProblem MakeProblem(std::vector<std::vector<Candidate>> candidates,
                          std::vector<std::vector<double>> gains,
                          std::vector<char> advantaged, int k, double epsilon,
                          std::vector<double> idcg) {
  Require(k >= 1, "K must be >= 1");
  Require(epsilon >= 0.0, "epsilon must be >= 0");
  const size_t n = candidates.size();
  Require(gains.size() == n && advantaged.size() == n,
          "candidates, gains and group flags disagree on the user count");
  Require(idcg.empty() || idcg.size() == n, "idcg does not cover all users");
  RerankProblem problem;
  problem.k = k;
  problem.epsilon = epsilon;
  problem.users.resize(n);
  for (size_t u = 0; u < n; ++u) {
    auto& uc = problem.users[u];
    if (static_cast<int>(candidates[u].size()) < k) {
      throw Error(ErrorCode::kInfeasibleProblem,
                  "user " + std::to_string(u) + " has " +
                      std::to_string(candidates[u].size()) +
                      " candidates, fewer than K = " + std::to_string(k));
    }
    Require(gains[u].size() == candidates[u].size(),
            "gains not aligned with candidates for user " + std::to_string(u));
    for (size_t j = 0; j + 1 < candidates[u].size(); ++j) {
      Require(!CandidateBefore(candidates[u][j + 1], candidates[u][j]),
              "candidates of user " + std::to_string(u) + " are not sorted");
    }
    for (double g : gains[u]) {
      Require(std::isfinite(g), "non-finite gain for user " + std::to_string(u));
    }
    uc.candidates = std::move(candidates[u]);
    uc.gains = std::move(gains[u]);
    uc.advantaged = advantaged[u] != 0;
    uc.idcg = idcg.empty() ? IdealDcg(uc.gains, k) : idcg[u];
    Require(uc.idcg > 0.0,
            "estimated ideal DCG must be positive for user " + std::to_string(u));
    (uc.advantaged ? problem.n_advantaged : problem.n_disadvantaged)++;
  }
  if (problem.n_advantaged == 0 || problem.n_disadvantaged == 0) {
    throw Error(ErrorCode::kDegenerateGrouping,
                "rerank problem needs users in both groups");
  }
  return problem;
}

std::vector<double> ExpectedRelevantCounts(const InteractionSet& train,
                                           double test_fraction,
                                           double threshold) {
  Require(test_fraction > 0.0 && test_fraction < 1.0,
          "test fraction must be in (0, 1)");
  std::vector<double> counts(train.n_users(), 0.0);
  for (const auto& x : train.interactions) {
    if (x.rating >= threshold) counts[x.user] += 1.0;
  }
  const double scale = test_fraction / (1.0 - test_fraction);
  for (double& c : counts) c *= scale;
  return counts;
}

int GainCalibration::Bucket(double m) const {
  const auto it =
      std::lower_bound(bucket_upper.begin(), bucket_upper.end(), m);
  if (it == bucket_upper.end()) return static_cast<int>(bucket_upper.size()) - 1;
  return static_cast<int>(it - bucket_upper.begin());
}

GainCalibration FitCalibration(const CandidateLists& candidates,
                               const std::vector<ItemSet>& relevant,
                               std::span<const double> expected, int k,
                               int buckets) {
  Require(relevant.size() == candidates.lists.size() &&
              expected.size() == candidates.lists.size(),
          "calibration inputs disagree on the user count");
  Require(k >= 1 && buckets >= 1, "calibration needs K >= 1 and buckets >= 1");
  size_t depth = 0;
  for (const auto& list : candidates.lists) depth = std::max(depth, list.size());
  std::vector<CompensatedSum> hits(depth);
  std::vector<int64_t> seen(depth, 0);
  struct Scored {
    double expected;
    double ndcg;
  };
  std::vector<Scored> users;
  for (size_t u = 0; u < candidates.lists.size(); ++u) {
    if (relevant[u].empty()) continue;
    const auto& list = candidates.lists[u];
    const int cap = std::min<int>(k, static_cast<int>(relevant[u].size()));
    double ideal = 0.0;
    for (int p = 0; p < cap; ++p) ideal += Discount(p);
    double dcg = 0.0;
    for (size_t j = 0; j < list.size(); ++j) {
      const bool hit = relevant[u].count(list[j].item) > 0;
      if (hit) hits[j].Add(1.0 / ideal);
      if (hit && static_cast<int>(j) < k) dcg += Discount(static_cast<int>(j));
      ++seen[j];
    }
    users.push_back({expected[u], dcg / ideal});
  }
  GainCalibration cal;
  cal.rank_gain.assign(depth, 0.0);
  for (size_t j = 0; j < depth; ++j) {
    if (seen[j] > 0) cal.rank_gain[j] = hits[j].Value() / static_cast<double>(seen[j]);
  }
  std::stable_sort(users.begin(), users.end(),
                   [](const Scored& a, const Scored& b) {
                     return a.expected < b.expected;
                   });
  const int n = static_cast<int>(users.size());
  const int b_count = std::max(1, std::min(buckets, n));
  CompensatedSum pooled;
  for (const auto& x : users) pooled.Add(x.ndcg);
  const double pooled_mean = n > 0 ? pooled.Value() / n : 0.0;
  for (int b = 0; b < b_count; ++b) {
    const int lo = static_cast<int>(static_cast<int64_t>(b) * n / b_count);
    const int hi = static_cast<int>(static_cast<int64_t>(b + 1) * n / b_count);
    CompensatedSum sum;
    for (int i = lo; i < hi; ++i) sum.Add(users[i].ndcg);
    const double mean = hi > lo ? sum.Value() / (hi - lo) : pooled_mean;
    cal.bucket_scale.push_back(pooled_mean > 0.0 ? mean / pooled_mean : 1.0);
    cal.bucket_upper.push_back(
        b + 1 < b_count
            ? 0.5 * (users[hi - 1].expected + users[hi].expected)
            : std::numeric_limits<double>::infinity());
  }
  return cal;
}

RerankProblem BuildProblem(const CandidateLists& candidates,
                           const Grouping& grouping, int k, double epsilon,
                           GainModel gain_model,
                           const GainCalibration* calibration) {
  Require(candidates.n_users() == grouping.n_users(),
          "candidate lists and grouping disagree on the user count");
  const int n = candidates.n_users();
  std::vector<std::vector<double>> gains(n);
  std::vector<double> idcg;
  if (gain_model == GainModel::kPerUserMinMax) {
    for (int u = 0; u < n; ++u) {
      const auto& list = candidates.lists[u];
      gains[u].resize(list.size(), 1.0);
      if (list.empty()) continue;
      double lo = list.front().score, hi = list.front().score;
      for (const auto& c : list) {
        lo = std::min(lo, c.score);
        hi = std::max(hi, c.score);
      }
      if (hi > lo) {
        for (size_t j = 0; j < list.size(); ++j) {
          gains[u][j] = (list[j].score - lo) / (hi - lo);
        }
      }
    }
  } else if (gain_model == GainModel::kCalibrated) {
    Require(calibration != nullptr, "calibrated gains need a calibration");
    Require(calibration->expected_relevant.size() ==
                    static_cast<size_t>(n) &&
                !calibration->bucket_scale.empty() &&
                calibration->bucket_scale.size() ==
                    calibration->bucket_upper.size(),
            "calibration does not cover all users");
    idcg.assign(n, 1.0);
    for (int u = 0; u < n; ++u) {
      const double scale = calibration->bucket_scale[calibration->Bucket(
          calibration->expected_relevant[u])];
      const auto& list = candidates.lists[u];
      gains[u].resize(list.size(), 0.0);
      for (size_t j = 0; j < list.size() && j < calibration->rank_gain.size();
           ++j) {
        gains[u][j] = std::min(1.0, scale * calibration->rank_gain[j]);
      }
    }
  } else {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& list : candidates.lists) {
      for (const auto& c : list) {
        lo = std::min(lo, c.score);
        hi = std::max(hi, c.score);
      }
    }
    double ideal = 0.0;
    for (int p = 0; p < k; ++p) ideal += Discount(p);
    idcg.assign(n, ideal);
    for (int u = 0; u < n; ++u) {
      const auto& list = candidates.lists[u];
      gains[u].resize(list.size(), 1.0);
      if (hi > lo) {
        for (size_t j = 0; j < list.size(); ++j) {
          gains[u][j] = (list[j].score - lo) / (hi - lo);
        }
      }
    }
  }
  return MakeProblem(candidates.lists, std::move(gains),
                     grouping.is_advantaged, k, epsilon, std::move(idcg));
}

std::vector<int> Selection::Items(const RerankProblem& problem,
                                  int user) const {
  std::vector<int> items;
  items.reserve(positions[user].size());
  for (int p : positions[user]) {
    items.push_back(problem.users[user].candidates[p].item);
  }
  return items;
}

double EstimatedNdcg(const RerankProblem& problem, int user,
                     std::span<const int> positions) {
  const auto& uc = problem.users[user];
  double dcg = 0.0;
  for (size_t slot = 0; slot < positions.size(); ++slot) {
    dcg += uc.gains[positions[slot]] * Discount(static_cast<int>(slot));
  }
  return dcg / uc.idcg;
}

namespace {

double UgfFromNdcg(const RerankProblem& problem,
                   const std::vector<double>& ndcg) {
  CompensatedSum adv, dis;
  for (int u = 0; u < problem.n_users(); ++u) {
    (problem.users[u].advantaged ? adv : dis).Add(ndcg[u]);
  }
  return adv.Value() / problem.n_advantaged -
         dis.Value() / problem.n_disadvantaged;
}

}  // namespace

double EstimatedUgf(const RerankProblem& problem,
                    const std::vector<std::vector<int>>& positions) {
  std::vector<double> ndcg(problem.n_users());
  for (int u = 0; u < problem.n_users(); ++u) {
    ndcg[u] = EstimatedNdcg(problem, u, positions[u]);
  }
  return UgfFromNdcg(problem, ndcg);
}

double SelectionObjective(const RerankProblem& problem,
                          const std::vector<std::vector<int>>& positions) {
  CompensatedSum sum;
  for (int u = 0; u < problem.n_users(); ++u) {
    for (int p : positions[u]) sum.Add(problem.users[u].candidates[p].score);
  }
  return sum.Value();
}

void Rescore(const RerankProblem& problem, Selection& selection) {
  selection.objective = SelectionObjective(problem, selection.positions);
  selection.est_ugf = EstimatedUgf(problem, selection.positions);
}

bool IsFeasible(const RerankProblem& problem, const Selection& selection) {
  return std::abs(selection.est_ugf) <= problem.epsilon + kFeasibilityTol;
}

Selection SolveIdentity(const RerankProblem& problem) {
  Selection selection;
  selection.solver = SolverKind::kIdentity;
  selection.positions.resize(problem.n_users());
  for (auto& positions : selection.positions) {
    positions.resize(problem.k);
    for (int j = 0; j < problem.k; ++j) positions[j] = j;
  }
  Rescore(problem, selection);
  return selection;
}

UserDpResult PerUserDp(const RerankProblem& problem, int user,
                       double lambda) {
  const auto& uc = problem.users[user];
  const int n = static_cast<int>(uc.candidates.size());
  const int k = problem.k;
  const double penalty = lambda * problem.UgfWeight(user);
  // best[c][j]: best value over candidates c..n-1 with j slots already used.
  const int width = k + 1;
  std::vector<double> best(static_cast<size_t>(n + 1) * width, kNegInf);
  auto at = [&](int c, int j) -> double& {
    return best[static_cast<size_t>(c) * width + j];
  };
  for (int c = 0; c <= n; ++c) at(c, k) = 0.0;
  auto take_value = [&](int c, int j) {
    const double rest = at(c + 1, j + 1);
    if (rest == kNegInf) return kNegInf;
    return uc.candidates[c].score - penalty * uc.gains[c] * Discount(j) + rest;
  };
  for (int c = n - 1; c >= 0; --c) {
    for (int j = std::min(k - 1, c); j >= 0; --j) {
      at(c, j) = std::max(take_value(c, j), at(c + 1, j));
    }
  }
  UserDpResult result;
  result.value = at(0, 0);
  result.positions.reserve(k);
  int j = 0;
  for (int c = 0; c < n && j < k; ++c) {
    const double take = take_value(c, j);
    if (take != kNegInf && take >= at(c + 1, j)) {
      result.positions.push_back(c);
      ++j;
    }
  }
  return result;
}

namespace {

Selection EvaluateLambda(const RerankProblem& problem, double lambda,
                         int threads) {
  Selection selection;
  selection.solver = SolverKind::kLagrangian;
  selection.lambda_star = lambda;
  selection.positions.resize(problem.n_users());
  ParallelFor(problem.n_users(), threads, [&](size_t u) {
    selection.positions[u] =
        PerUserDp(problem, static_cast<int>(u), lambda).positions;
  });
  Rescore(problem, selection);
  return selection;
}

// Prefers higher objective, then the earlier candidate.
bool BetterFeasible(const Selection& a, const std::optional<Selection>& b) {
  return !b || a.objective > b->objective;
}

// Prefers smaller |est_ugf|, then higher objective.
bool CloserToFeasible(const Selection& a, const std::optional<Selection>& b) {
  if (!b) return true;
  const double da = std::abs(a.est_ugf), db = std::abs(b->est_ugf);
  return da < db || (da == db && a.objective > b->objective);
}

}  // namespace

namespace {
Selection SwapSequence(Selection selection, const RerankProblem& problem,
                       bool stop_when_feasible);
}  // namespace

Selection SolveLagrangian(const RerankProblem& problem,
                          const LagrangianOptions& options) {
  Selection identity = SolveIdentity(problem);
  identity.solver = SolverKind::kLagrangian;
  if (IsFeasible(problem, identity)) {
    identity.lambda_star = 0.0;
    return identity;
  }
  const double direction = identity.est_ugf > 0 ? 1.0 : -1.0;
  const double eps = problem.epsilon;
  std::optional<Selection> best_feasible;
  std::optional<Selection> closest;
  std::optional<Selection> last_violating;   // largest lambda still violating
  std::optional<Selection> first_satisfied;  // smallest lambda meeting it
  int iterations = 0;

  auto evaluate = [&](double lambda) {
    Selection s = EvaluateLambda(problem, direction * lambda, options.threads);
    s.lambda_star = lambda;
    ++iterations;
    if (IsFeasible(problem, s)) {
      if (BetterFeasible(s, best_feasible)) best_feasible = s;
    } else if (CloserToFeasible(s, closest)) {
      closest = s;
    }
    return s;
  };
  // One-sided constraint on the violated side.
  auto satisfied = [&](const Selection& s) {
    return direction * s.est_ugf <= eps + kFeasibilityTol;
  };

  constexpr double kLambdaCap = 1073741824.0;  // 2^30
  double lo = 0.0;
  double hi = 1.0;
  bool bracketed = false;
  while (true) {
    Selection s = evaluate(hi);
    if (satisfied(s)) {
      first_satisfied = s;
      bracketed = true;
      break;
    }
    last_violating = s;
    lo = hi;
    if (hi >= kLambdaCap) break;
    hi *= 2.0;
  }
  if (bracketed) {
    for (int it = 0; it < options.max_bisection_iters; ++it) {
      if (best_feasible &&
          eps - direction * best_feasible->est_ugf <= options.tol) {
        break;
      }
      const double mid = 0.5 * (lo + hi);
      if (!(mid > lo && mid < hi)) break;
      Selection s = evaluate(mid);
      if (satisfied(s)) {
        hi = mid;
        first_satisfied = s;
      } else {
        lo = mid;
        last_violating = s;
      }
    }
  }

  // The relaxation can leave a duality gap; repairing the points on either
  // side of the bracket often beats the feasible side alone.
  for (const auto* start : {&last_violating, &first_satisfied}) {
    if (!*start) continue;
    Selection repaired = SwapSequence(**start, problem, false);
    if (!repaired.violation && BetterFeasible(repaired, best_feasible)) {
      repaired.lambda_star = (*start)->lambda_star;
      best_feasible = repaired;
    }
  }
  if (best_feasible) {
    best_feasible->solver = SolverKind::kLagrangian;
    best_feasible->iterations = iterations;
    return *best_feasible;
  }
  Selection repaired =
      SwapSequence(closest ? *closest : identity, problem, false);
  repaired.solver = SolverKind::kLagrangian;
  repaired.iterations = iterations;
  if (!repaired.violation) return repaired;
  throw InfeasibleEpsilonError(
      "epsilon " + FormatDouble(eps) +
          " unreachable; minimum |estimated UGF| found " +
          FormatDouble(std::abs(repaired.est_ugf)),
      repaired);
}

namespace {

struct SwapMove {
  double delta_ugf = 0.0;
  double loss = 0.0;
  int slot = 0;      // index into the user's positions
  int incoming = 0;  // candidate position entering the selection
};

std::vector<SwapMove> UserSwaps(const RerankProblem& problem, int user,
                                const std::vector<int>& positions,
                                double current_ndcg) {
  const auto& uc = problem.users[user];
  const int n = static_cast<int>(uc.candidates.size());
  const double group_share =
      uc.advantaged ? 1.0 / problem.n_advantaged
                    : -1.0 / problem.n_disadvantaged;
  std::vector<char> chosen(n, 0);
  for (int p : positions) chosen[p] = 1;
  std::vector<SwapMove> moves;
  std::vector<int> trial(positions.size());
  for (size_t slot = 0; slot < positions.size(); ++slot) {
    for (int b = 0; b < n; ++b) {
      if (chosen[b]) continue;
      trial = positions;
      trial[slot] = b;
      std::sort(trial.begin(), trial.end());
      const double ndcg = EstimatedNdcg(problem, user, trial);
      moves.push_back({group_share * (ndcg - current_ndcg),
                       uc.candidates[positions[slot]].score -
                           uc.candidates[b].score,
                       static_cast<int>(slot), b});
    }
  }
  return moves;
}

}  // namespace

namespace {

// Greedy swap sequence shared by RepairSwap and the solver. With
// `stop_when_feasible` it halts at the first feasible point; otherwise it
// runs until no swap strictly reduces |estimated UGF| and returns the best
// feasible point seen, which makes the outcome independent of where epsilon
// cuts the sequence.
Selection SwapSequence(Selection selection, const RerankProblem& problem,
                       bool stop_when_feasible) {
  const int n = problem.n_users();
  std::vector<double> ndcg(n);
  for (int u = 0; u < n; ++u) {
    ndcg[u] = EstimatedNdcg(problem, u, selection.positions[u]);
  }
  std::vector<std::vector<SwapMove>> moves(n);
  for (int u = 0; u < n; ++u) {
    moves[u] = UserSwaps(problem, u, selection.positions[u], ndcg[u]);
  }
  constexpr int kMaxSwaps = 1000000;
  const double limit = problem.epsilon + kFeasibilityTol;
  std::optional<std::vector<std::vector<int>>> best_positions;
  double best_objective = -std::numeric_limits<double>::infinity();
  double objective = SelectionObjective(problem, selection.positions);
  for (int step = 0;; ++step) {
    const double current = UgfFromNdcg(problem, ndcg);
    if (std::abs(current) <= limit) {
      if (objective > best_objective) {
        best_objective = objective;
        best_positions = selection.positions;
      }
      if (stop_when_feasible) break;
    }
    if (step >= kMaxSwaps) break;
    int best_user = -1;
    size_t best_move = 0;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int u = 0; u < n; ++u) {
      for (size_t m = 0; m < moves[u].size(); ++m) {
        const auto& mv = moves[u][m];
        const double reduction =
            std::abs(current) - std::abs(current + mv.delta_ugf);
        if (!(reduction > 1e-15)) continue;
        const double ratio = mv.loss / reduction;
        if (ratio < best_ratio) {
          best_ratio = ratio;
          best_user = u;
          best_move = m;
        }
      }
    }
    if (best_user < 0) break;
    const SwapMove mv = moves[best_user][best_move];
    auto& positions = selection.positions[best_user];
    positions[mv.slot] = mv.incoming;
    std::sort(positions.begin(), positions.end());
    objective -= mv.loss;
    ndcg[best_user] = EstimatedNdcg(problem, best_user, positions);
    moves[best_user] = UserSwaps(problem, best_user, positions, ndcg[best_user]);
  }
  if (best_positions) selection.positions = std::move(*best_positions);
  Rescore(problem, selection);
  selection.violation = !IsFeasible(problem, selection);
  return selection;
}

}  // namespace

Selection RepairSwap(Selection selection, const RerankProblem& problem) {
  return SwapSequence(std::move(selection), problem, true);
}

namespace {

struct Subset {
  std::vector<int> positions;
  double score = 0.0;
  double ugf_term = 0.0;
};

std::vector<Subset> EnumerateSubsets(const RerankProblem& problem, int user) {
  const auto& uc = problem.users[user];
  const int n = static_cast<int>(uc.candidates.size());
  const int k = problem.k;
  const double group_share =
      uc.advantaged ? 1.0 / problem.n_advantaged
                    : -1.0 / problem.n_disadvantaged;
  std::vector<Subset> out;
  std::vector<int> comb(k);
  for (int j = 0; j < k; ++j) comb[j] = j;
  while (true) {
    Subset s;
    s.positions = comb;
    for (int p : comb) s.score += uc.candidates[p].score;
    s.ugf_term = group_share * EstimatedNdcg(problem, user, comb);
    out.push_back(std::move(s));
    int j = k - 1;
    while (j >= 0 && comb[j] == n - k + j) --j;
    if (j < 0) break;
    ++comb[j];
    for (int t = j + 1; t < k; ++t) comb[t] = comb[t - 1] + 1;
  }
  return out;
}

}  // namespace

Selection BruteForceSolve(const RerankProblem& problem,
                          double max_joint_selections) {
  const int n = problem.n_users();
  const int k = problem.k;
  double joint = 1.0;
  for (const auto& uc : problem.users) {
    const int m = static_cast<int>(uc.candidates.size());
    double c = 1.0;
    for (int j = 0; j < k; ++j) c = c * (m - j) / (j + 1);
    joint *= std::round(c);
  }
  if (joint > max_joint_selections) {
    throw Error(ErrorCode::kSizeGuard,
                "brute force needs " + FormatDouble(joint) +
                    " joint selections, above the guard of " +
                    FormatDouble(max_joint_selections));
  }
  std::vector<std::vector<Subset>> subsets(n);
  std::vector<double> best_rest(n + 1, 0.0);
  for (int u = 0; u < n; ++u) subsets[u] = EnumerateSubsets(problem, u);
  for (int u = n - 1; u >= 0; --u) {
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& s : subsets[u]) mx = std::max(mx, s.score);
    best_rest[u] = best_rest[u + 1] + mx;
  }

  std::vector<int> choice(n, 0), best_choice, closest_choice;
  double best_objective = -std::numeric_limits<double>::infinity();
  double closest_abs = std::numeric_limits<double>::infinity();
  const double limit = problem.epsilon + kFeasibilityTol;

  auto search = [&](auto&& self, int u, double objective, double ugf) -> void {
    if (u == n) {
      const double a = std::abs(ugf);
      if (a < closest_abs) {
        closest_abs = a;
        closest_choice = choice;
      }
      if (a <= limit && objective > best_objective) {
        best_objective = objective;
        best_choice = choice;
      }
      return;
    }
    for (size_t s = 0; s < subsets[u].size(); ++s) {
      const auto& sub = subsets[u][s];
      // Ties cannot replace the incumbent, so equal bounds are pruned.
      if (!best_choice.empty() &&
          objective + sub.score + best_rest[u + 1] <
              best_objective - 1e-12 * (1.0 + std::abs(best_objective)) &&
          closest_abs <= limit) {
        continue;
      }
      choice[u] = static_cast<int>(s);
      self(self, u + 1, objective + sub.score, ugf + sub.ugf_term);
    }
  };
  search(search, 0, 0.0, 0.0);

  auto to_selection = [&](const std::vector<int>& picks) {
    Selection selection;
    selection.solver = SolverKind::kBruteForce;
    selection.positions.resize(n);
    for (int u = 0; u < n; ++u) {
      selection.positions[u] = subsets[u][picks[u]].positions;
    }
    Rescore(problem, selection);
    return selection;
  };
  if (best_choice.empty()) {
    Selection closest = to_selection(closest_choice);
    closest.violation = true;
    throw InfeasibleEpsilonError(
        "no joint selection satisfies epsilon " +
            FormatDouble(problem.epsilon) + "; minimum |estimated UGF| is " +
            FormatDouble(closest_abs),
        closest);
  }
  return to_selection(best_choice);
}

CandidateLists ApplySelection(const Selection& selection,
                              const RerankProblem& problem,
                              std::string provenance) {
  CandidateLists out;
  out.k_target = problem.k;
  out.provenance = std::move(provenance);
  out.lists.resize(problem.n_users());
  for (int u = 0; u < problem.n_users(); ++u) {
    for (int p : selection.positions[u]) {
      out.lists[u].push_back(problem.users[u].candidates[p]);
    }
  }
  return out;
}

namespace {
constexpr std::string_view kProblemMagic = "fairrank-problem";
}

std::string FormatProblem(const RerankProblem& problem) {
  std::string out = std::string(kProblemMagic) + " 1\n";
  out += "k " + std::to_string(problem.k) + "\n";
  out += "epsilon " + FormatDouble(problem.epsilon) + "\n";
  out += "groups " + std::to_string(problem.n_advantaged) + " " +
         std::to_string(problem.n_disadvantaged) + "\n";
  out += "users " + std::to_string(problem.n_users()) + "\n";
  for (int u = 0; u < problem.n_users(); ++u) {
    const auto& uc = problem.users[u];
    out += "user " + std::to_string(u) + (uc.advantaged ? " adv " : " dis ") +
           std::to_string(uc.candidates.size()) + " " +
           FormatDouble(uc.idcg) + "\n";
    for (size_t j = 0; j < uc.candidates.size(); ++j) {
      out += std::to_string(uc.candidates[j].item) + "\t" +
             FormatDouble(uc.candidates[j].score) + "\t" +
             FormatDouble(uc.gains[j]) + "\n";
    }
  }
  return out;
}

RerankProblem ParseProblem(std::string_view text) {
  std::istringstream in{std::string(text)};
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kParse, "problem dump: " + what);
  };
  auto token = [&]() {
    std::string t;
    if (!(in >> t)) fail("truncated");
    return t;
  };
  auto expect = [&](const std::string& key) {
    if (token() != key) fail("expected '" + key + "'");
  };
  if (token() != kProblemMagic || token() != "1") fail("bad magic or version");
  expect("k");
  const int k = static_cast<int>(ParseInt(token(), "k"));
  expect("epsilon");
  const double epsilon = ParseDouble(token(), "epsilon");
  expect("groups");
  const int64_t n_adv = ParseInt(token(), "groups");
  const int64_t n_dis = ParseInt(token(), "groups");
  expect("users");
  const int64_t n = ParseInt(token(), "users");
  if (n < 0) fail("negative user count");
  std::vector<std::vector<Candidate>> candidates(n);
  std::vector<std::vector<double>> gains(n);
  std::vector<char> advantaged(n, 0);
  std::vector<double> idcg(n);
  for (int64_t u = 0; u < n; ++u) {
    expect("user");
    if (ParseInt(token(), "user") != u) fail("users out of order");
    const std::string label = token();
    if (label != "adv" && label != "dis") fail("bad group label " + label);
    advantaged[u] = label == "adv";
    const int64_t m = ParseInt(token(), "candidate count");
    idcg[u] = ParseDouble(token(), "idcg");
    for (int64_t j = 0; j < m; ++j) {
      Candidate c;
      c.item = static_cast<int>(ParseInt(token(), "item"));
      c.score = ParseDouble(token(), "score");
      candidates[u].push_back(c);
      gains[u].push_back(ParseDouble(token(), "gain"));
    }
  }
  RerankProblem problem = MakeProblem(std::move(candidates), std::move(gains),
                                      std::move(advantaged), k, epsilon,
                                      std::move(idcg));
  if (problem.n_advantaged != n_adv || problem.n_disadvantaged != n_dis) {
    fail("group sizes disagree with user labels");
  }
  return problem;
}

}  // namespace fairrank
