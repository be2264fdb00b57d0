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

#include "fairrank/rankers.h"

#include <algorithm>
#include <limits>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fairrank/error.h"
#include "fairrank/util.h"

namespace fairrank {

size_t CandidateLists::TotalSlots() const {
  size_t total = 0;
  for (const auto& list : lists) total += list.size();
  return total;
}

std::vector<std::vector<int>> CandidateLists::Items() const {
  std::vector<std::vector<int>> out(lists.size());
  for (size_t u = 0; u < lists.size(); ++u) {
    out[u].reserve(lists[u].size());
    for (const auto& c : lists[u]) out[u].push_back(c.item);
  }
  return out;
}

double FactorModel::Score(int user, int item) const {
  double s = dim() > 0 ? user_factors.row(user).dot(item_factors.row(item))
                       : 0.0;
  if (user_bias.size() > 0) s += user_bias[user];
  if (item_bias.size() > 0) s += item_bias[item];
  return s;
}

void FactorModel::ScoreUser(int user, std::span<double> out) const {
  const int ni = n_items();
  Eigen::Map<Eigen::VectorXd> scores(out.data(), ni);
  if (dim() > 0) {
    scores.noalias() = item_factors * user_factors.row(user).transpose();
  } else {
    scores.setZero();
  }
  if (item_bias.size() > 0) scores += item_bias;
  if (user_bias.size() > 0) scores.array() += user_bias[user];
}

bool FactorModel::AllFinite() const {
  return user_factors.allFinite() && item_factors.allFinite() &&
         user_bias.allFinite() && item_bias.allFinite();
}

FactorModel TrainMostPop(const InteractionSet& train) {
  FactorModel model;
  model.name = "mostpop";
  model.user_factors.resize(train.n_users(), 0);
  model.item_factors.resize(train.n_items(), 0);
  model.item_bias = Eigen::VectorXd::Zero(train.n_items());
  for (const auto& x : train.interactions) model.item_bias[x.item] += 1.0;
  return model;
}

namespace {

FactorModel::Matrix GaussianMatrix(int rows, int cols, double stddev,
                                   Rng& rng) {
  FactorModel::Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = stddev * StandardNormal(rng);
  }
  return m;
}

// log(1 + exp(-x)) without overflow.
double SoftplusNeg(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

}  // namespace

FactorModel TrainBpr(const InteractionSet& train, const BprOptions& options,
                     TrainTrace* trace) {
  Require(options.dim >= 1, "BPR requires dim >= 1");
  Require(!train.empty(), "BPR requires a non-empty training set");
  Require(options.epochs >= 0, "BPR requires epochs >= 0");
  Rng rng(options.seed);
  FactorModel model;
  model.name = "bpr";
  model.seed = options.seed;
  model.user_factors =
      GaussianMatrix(train.n_users(), options.dim, 0.1, rng);
  model.item_factors =
      GaussianMatrix(train.n_items(), options.dim, 0.1, rng);
  model.item_bias = Eigen::VectorXd::Zero(train.n_items());

  const auto seen = train.SortedItemsByUser();
  const uint64_t n_items = static_cast<uint64_t>(train.n_items());
  const double lr = options.learning_rate;
  const double reg = options.reg;
  Eigen::VectorXd user_row(options.dim);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    double loss = 0.0;
    for (size_t step = 0; step < train.size(); ++step) {
      const auto& x = train.interactions[UniformIndex(rng, train.size())];
      const auto& profile = seen[x.user];
      if (profile.size() >= n_items) continue;
      int neg;
      do {
        neg = static_cast<int>(UniformIndex(rng, n_items));
      } while (std::binary_search(profile.begin(), profile.end(), neg));

      auto pu = model.user_factors.row(x.user);
      auto qi = model.item_factors.row(x.item);
      auto qj = model.item_factors.row(neg);
      const double diff = pu.dot(qi - qj) + model.item_bias[x.item] -
                          model.item_bias[neg];
      loss += SoftplusNeg(diff);
      const double z = 1.0 / (1.0 + std::exp(diff));
      user_row = pu;
      pu += lr * (z * (qi - qj) - reg * pu);
      qi += lr * (z * user_row.transpose() - reg * qi);
      qj += lr * (-z * user_row.transpose() - reg * qj);
      model.item_bias[x.item] += lr * (z - reg * model.item_bias[x.item]);
      model.item_bias[neg] += lr * (-z - reg * model.item_bias[neg]);
    }
    if (!std::isfinite(loss) || !model.AllFinite()) {
      throw Error(ErrorCode::kTraining,
                  "BPR diverged at epoch " + std::to_string(epoch));
    }
    if (trace) trace->values.push_back(loss / std::max<size_t>(1, train.size()));
  }
  return model;
}

double WmfObjective(const InteractionSet& train, const FactorModel& model,
                    double confidence_alpha, double reg) {
  // Sum over all cells of s^2, then correct the observed cells.
  const Eigen::MatrixXd xtx = model.user_factors.transpose() * model.user_factors;
  const Eigen::MatrixXd yty = model.item_factors.transpose() * model.item_factors;
  CompensatedSum total;
  total.Add(xtx.cwiseProduct(yty).sum());
  for (const auto& x : train.interactions) {
    const double s = model.Score(x.user, x.item);
    const double c = 1.0 + confidence_alpha * x.rating;
    total.Add(c * (1.0 - s) * (1.0 - s) - s * s);
  }
  total.Add(reg * (model.user_factors.squaredNorm() +
                   model.item_factors.squaredNorm()));
  return total.Value();
}

namespace {

struct Adjacency {
  std::vector<std::vector<size_t>> edges;  // interaction indices per row
};

Adjacency ByUser(const InteractionSet& data) {
  Adjacency adj;
  adj.edges.resize(data.n_users());
  for (size_t e = 0; e < data.size(); ++e) {
    adj.edges[data.interactions[e].user].push_back(e);
  }
  return adj;
}

Adjacency ByItem(const InteractionSet& data) {
  Adjacency adj;
  adj.edges.resize(data.n_items());
  for (size_t e = 0; e < data.size(); ++e) {
    adj.edges[data.interactions[e].item].push_back(e);
  }
  return adj;
}

// One ALS half-step: re-solves every row of `solve` with `fixed` held.
void AlsHalfStep(const InteractionSet& train, const Adjacency& adj,
                 bool solving_users, const FactorModel::Matrix& fixed,
                 FactorModel::Matrix& solve, double alpha, double reg,
                 int threads) {
  const int d = static_cast<int>(fixed.cols());
  const Eigen::MatrixXd gram = fixed.transpose() * fixed;
  std::vector<char> failed(adj.edges.size(), 0);
  ParallelFor(adj.edges.size(), threads, [&](size_t row) {
    Eigen::MatrixXd a = gram;
    a.diagonal().array() += reg;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    for (size_t e : adj.edges[row]) {
      const auto& x = train.interactions[e];
      const int other = solving_users ? x.item : x.user;
      const double c = 1.0 + alpha * x.rating;
      auto y = fixed.row(other).transpose();
      a.noalias() += (c - 1.0) * y * y.transpose();
      b.noalias() += c * y;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
      failed[row] = 1;
      return;
    }
    solve.row(row) = llt.solve(b).transpose();
  });
  for (size_t row = 0; row < failed.size(); ++row) {
    if (failed[row]) {
      throw Error(ErrorCode::kSingularSystem,
                  std::string("WMF normal equations singular for ") +
                      (solving_users ? "user " : "item ") +
                      std::to_string(row) +
                      "; regularization must exceed the floor (reg > 0)");
    }
  }
}

}  // namespace

FactorModel TrainWmf(const InteractionSet& train, const WmfOptions& options,
                     TrainTrace* trace) {
  Require(options.dim >= 1, "WMF requires dim >= 1");
  Require(options.reg >= 0.0, "WMF requires reg >= 0");
  Require(options.confidence_alpha >= 0.0, "WMF requires alpha >= 0");
  Rng rng(options.seed);
  FactorModel model;
  model.name = "wmf";
  model.seed = options.seed;
  model.user_factors = GaussianMatrix(train.n_users(), options.dim, 0.01, rng);
  model.item_factors = GaussianMatrix(train.n_items(), options.dim, 0.01, rng);
  const Adjacency users = ByUser(train);
  const Adjacency items = ByItem(train);
  if (trace) {
    trace->values.push_back(WmfObjective(train, model, options.confidence_alpha,
                                         options.reg));
  }
  for (int it = 0; it < options.iterations; ++it) {
    AlsHalfStep(train, users, true, model.item_factors, model.user_factors,
                options.confidence_alpha, options.reg, options.threads);
    AlsHalfStep(train, items, false, model.user_factors, model.item_factors,
                options.confidence_alpha, options.reg, options.threads);
    if (trace) {
      trace->values.push_back(WmfObjective(
          train, model, options.confidence_alpha, options.reg));
    }
  }
  return model;
}

namespace {

struct GammaFactors {
  Eigen::MatrixXd shape;
  Eigen::MatrixXd rate;

  Eigen::MatrixXd Mean() const { return shape.cwiseQuotient(rate); }
  Eigen::MatrixXd MeanLog() const {
    Eigen::MatrixXd out(shape.rows(), shape.cols());
    for (Eigen::Index r = 0; r < shape.rows(); ++r) {
      for (Eigen::Index c = 0; c < shape.cols(); ++c) {
        out(r, c) = boost::math::digamma(shape(r, c)) - std::log(rate(r, c));
      }
    }
    return out;
  }
};

constexpr int kPfWarmupSweeps = 10;

GammaFactors InitGamma(int rows, int d, double shape0, double rate0,
                       Rng& rng) {
  GammaFactors g;
  g.shape.resize(rows, d);
  g.rate.resize(rows, d);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < d; ++c) {
      g.shape(r, c) = shape0 + UniformUnit(rng);
      g.rate(r, c) = rate0 + UniformUnit(rng);
    }
  }
  return g;
}

// E_q[log Gamma(x; a, b)] - E_q[log q(x)] summed over all entries.
double GammaKlTerms(const GammaFactors& g, double a, double b) {
  CompensatedSum sum;
  for (Eigen::Index r = 0; r < g.shape.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.shape.cols(); ++c) {
      const double s = g.shape(r, c);
      const double t = g.rate(r, c);
      const double elog = boost::math::digamma(s) - std::log(t);
      const double mean = s / t;
      const double prior = a * std::log(b) - std::lgamma(a) +
                           (a - 1.0) * elog - b * mean;
      const double entropy_neg =
          s * std::log(t) - std::lgamma(s) + (s - 1.0) * elog - s;
      sum.Add(prior - entropy_neg);
    }
  }
  return sum.Value();
}

// Accumulates sum_e y_e * phi_e (phi over latent dims) into out.row(row) for
// each row of the adjacency. phi_e is proportional to
// exp(elog_user[u] + elog_item[i]).
void AccumulateAllocations(const InteractionSet& train, const Adjacency& adj,
                           const Eigen::MatrixXd& elog_user,
                           const Eigen::MatrixXd& elog_item,
                           Eigen::MatrixXd& out, int threads) {
  const Eigen::Index d = elog_user.cols();
  out.setZero();
  ParallelFor(adj.edges.size(), threads, [&](size_t row) {
    Eigen::VectorXd logits(d);
    for (size_t e : adj.edges[row]) {
      const auto& x = train.interactions[e];
      logits = elog_user.row(x.user) + elog_item.row(x.item);
      const double mx = logits.maxCoeff();
      Eigen::VectorXd phi = (logits.array() - mx).exp();
      phi /= phi.sum();
      out.row(row) += x.rating * phi.transpose();
    }
  });
}

double PfElbo(const InteractionSet& train, const GammaFactors& theta,
              const GammaFactors& beta, const PfOptions& options) {
  const Eigen::MatrixXd elog_t = theta.MeanLog();
  const Eigen::MatrixXd elog_b = beta.MeanLog();
  CompensatedSum sum;
  for (const auto& x : train.interactions) {
    Eigen::VectorXd logits =
        (elog_t.row(x.user) + elog_b.row(x.item)).transpose();
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    sum.Add(x.rating * lse - std::lgamma(x.rating + 1.0));
  }
  const Eigen::VectorXd theta_total = theta.Mean().colwise().sum();
  const Eigen::VectorXd beta_total = beta.Mean().colwise().sum();
  sum.Add(-theta_total.dot(beta_total));
  sum.Add(GammaKlTerms(theta, options.prior_shape, options.prior_rate));
  sum.Add(GammaKlTerms(beta, options.prior_shape, options.prior_rate));
  return sum.Value();
}

}  // namespace

FactorModel TrainPf(const InteractionSet& train, const PfOptions& options,
                    TrainTrace* trace) {
  Require(options.dim >= 1, "PF requires dim >= 1");
  Require(options.prior_shape > 0.0 && options.prior_rate > 0.0,
          "PF priors must be positive");
  for (const auto& x : train.interactions) {
    Require(x.rating >= 0.0, "PF requires non-negative ratings");
  }
  Rng rng(options.seed);
  const int d = options.dim;
  const double a = options.prior_shape;
  const double b = options.prior_rate;
  const Adjacency users = ByUser(train);
  const Adjacency items = ByItem(train);
  Eigen::MatrixXd user_alloc(train.n_users(), d);
  Eigen::MatrixXd item_alloc(train.n_items(), d);

  auto check = [&](double elbo, int iteration) {
    if (!std::isfinite(elbo)) {
      throw Error(ErrorCode::kTraining,
                  "PF ELBO non-finite at iteration " +
                      std::to_string(iteration));
    }
  };
  // One sweep: allocation update followed by both Gamma blocks; every step
  // is an exact coordinate maximizer so the bound cannot decrease.
  auto sweep = [&](GammaFactors& theta, GammaFactors& beta) {
    const Eigen::MatrixXd elog_t = theta.MeanLog();
    const Eigen::MatrixXd elog_b = beta.MeanLog();
    AccumulateAllocations(train, users, elog_t, elog_b, user_alloc,
                          options.threads);
    AccumulateAllocations(train, items, elog_t, elog_b, item_alloc,
                          options.threads);
    const Eigen::RowVectorXd beta_total = beta.Mean().colwise().sum();
    theta.shape = user_alloc.array() + a;
    theta.rate = (beta_total.replicate(train.n_users(), 1).array() + b).matrix();
    const Eigen::RowVectorXd theta_total = theta.Mean().colwise().sum();
    beta.shape = item_alloc.array() + a;
    beta.rate = (theta_total.replicate(train.n_items(), 1).array() + b).matrix();
  };

  // Short warm-up runs from independent starts; the start with the best
  // bound continues. Guards against collapsed components.
  const int starts = std::max(1, options.restarts);
  const int warmup = std::min(options.iterations, kPfWarmupSweeps);
  GammaFactors theta, beta;
  std::vector<double> best_trace;
  double best_elbo = -std::numeric_limits<double>::infinity();
  for (int start = 0; start < starts; ++start) {
    GammaFactors t = InitGamma(train.n_users(), d, a, b, rng);
    GammaFactors bt = InitGamma(train.n_items(), d, a, b, rng);
    std::vector<double> local;
    double elbo = PfElbo(train, t, bt, options);
    check(elbo, 0);
    local.push_back(elbo);
    for (int it = 0; it < warmup; ++it) {
      sweep(t, bt);
      elbo = PfElbo(train, t, bt, options);
      check(elbo, it + 1);
      local.push_back(elbo);
    }
    if (start == 0 || elbo > best_elbo) {
      best_elbo = elbo;
      theta = std::move(t);
      beta = std::move(bt);
      best_trace = std::move(local);
    }
  }
  if (trace) trace->values = best_trace;
  for (int it = warmup; it < options.iterations; ++it) {
    sweep(theta, beta);
    if (trace) {
      const double elbo = PfElbo(train, theta, beta, options);
      check(elbo, it + 1);
      trace->values.push_back(elbo);
    }
  }
  FactorModel model;
  model.name = "pf";
  model.seed = options.seed;
  model.user_factors = theta.Mean();
  model.item_factors = beta.Mean();
  if (!model.AllFinite()) {
    throw Error(ErrorCode::kTraining, "PF produced non-finite factors");
  }
  return model;
}

CandidateLists PredictTopN(const Scorer& model, const InteractionSet& train,
                           int n, int threads) {
  Require(n >= 1, "candidate pool size must be >= 1");
  Require(model.n_users() >= train.n_users() &&
              model.n_items() >= train.n_items(),
          "model does not cover the training catalog");
  const auto seen = train.SortedItemsByUser();
  const int ni = train.n_items();
  CandidateLists out;
  out.lists.resize(train.n_users());
  ParallelFor(train.n_users(), threads, [&](size_t u) {
    std::vector<double> scores(model.n_items());
    model.ScoreUser(static_cast<int>(u), scores);
    std::vector<Candidate> pool;
    pool.reserve(ni);
    const auto& profile = seen[u];
    for (int i = 0; i < ni; ++i) {
      if (std::binary_search(profile.begin(), profile.end(), i)) continue;
      pool.push_back({i, scores[i]});
    }
    const size_t keep = std::min<size_t>(n, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + keep, pool.end(),
                      CandidateBefore);
    pool.resize(keep);
    out.lists[u] = std::move(pool);
  });
  if (const auto* fm = dynamic_cast<const FactorModel*>(&model)) {
    out.provenance = fm->name;
  }
  return out;
}

CandidateLists ParseScores(std::istream& in, const InteractionSet& data,
                           int n) {
  Require(n >= 1, "candidate pool size must be >= 1");
  std::vector<std::map<int, double>> by_user(data.n_users());
  std::vector<std::string> unknown;
  auto note_unknown = [&](std::string_view token) {
    if (std::find(unknown.begin(), unknown.end(), token) == unknown.end()) {
      unknown.emplace_back(token);
    }
  };
  std::string line;
  int64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string context = "score line " + std::to_string(line_number);
    auto fields = SplitFields(line, '\t');
    if (fields.size() != 3) {
      throw Error(ErrorCode::kParse, context + ": expected 3 fields");
    }
    const double score = ParseDouble(fields[2], context);
    if (!std::isfinite(score)) {
      throw Error(ErrorCode::kParse, context + ": non-finite score");
    }
    auto u = data.users.Find(fields[0]);
    auto i = data.items.Find(fields[1]);
    if (!u) note_unknown(fields[0]);
    if (!i) note_unknown(fields[1]);
    if (u && i) by_user[*u][*i] = score;
  }
  if (!unknown.empty()) {
    std::string message = "unresolved ids in score file:";
    for (const auto& token : unknown) message += " " + token;
    throw Error(ErrorCode::kResolution, message);
  }
  const auto seen = data.SortedItemsByUser();
  CandidateLists out;
  out.lists.resize(data.n_users());
  out.provenance = "import";
  for (int u = 0; u < data.n_users(); ++u) {
    auto& list = out.lists[u];
    for (const auto& [item, score] : by_user[u]) {
      if (std::binary_search(seen[u].begin(), seen[u].end(), item)) continue;
      list.push_back({item, score});
    }
    std::sort(list.begin(), list.end(), CandidateBefore);
    if (list.size() > static_cast<size_t>(n)) list.resize(n);
  }
  return out;
}

CandidateLists ImportScores(const std::filesystem::path& path,
                            const InteractionSet& data, int n) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  auto out = ParseScores(in, data, n);
  out.provenance = "import:" + path.filename().string();
  return out;
}

std::string FormatScores(const CandidateLists& candidates,
                         const InteractionSet& data) {
  std::string out;
  for (int u = 0; u < candidates.n_users(); ++u) {
    for (const auto& c : candidates.lists[u]) {
      out += data.users.External(u);
      out += '\t';
      out += data.items.External(c.item);
      out += '\t';
      out += FormatDouble(c.score);
      out += '\n';
    }
  }
  return out;
}

namespace {

constexpr std::string_view kModelMagic = "fairrank-model";
constexpr int kModelVersion = 1;

void WriteRows(std::string& out, const FactorModel::Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ' ';
      out += FormatDouble(m(r, c));
    }
    out += '\n';
  }
}

void WriteVector(std::string& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += FormatDouble(v[i]);
  }
  out += '\n';
}

}  // namespace

void SaveModel(const FactorModel& model, const std::filesystem::path& path) {
  std::string out;
  out += std::string(kModelMagic) + " " + std::to_string(kModelVersion) + "\n";
  out += "name " + model.name + "\n";
  out += "seed " + std::to_string(model.seed) + "\n";
  out += "dim " + std::to_string(model.dim()) + "\n";
  out += "users " + std::to_string(model.n_users()) + "\n";
  out += "items " + std::to_string(model.n_items()) + "\n";
  out += "user_bias " + std::to_string(model.user_bias.size() > 0) + "\n";
  out += "item_bias " + std::to_string(model.item_bias.size() > 0) + "\n";
  if (model.dim() > 0) {
    WriteRows(out, model.user_factors);
    WriteRows(out, model.item_factors);
  }
  if (model.user_bias.size() > 0) WriteVector(out, model.user_bias);
  if (model.item_bias.size() > 0) WriteVector(out, model.item_bias);
  WriteFileAtomic(path, out);
}

FactorModel LoadModel(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  const std::string context = path.string();
  auto expect_key = [&](const std::string& key) {
    std::string got;
    in >> got;
    if (got != key) {
      throw Error(ErrorCode::kParse,
                  context + ": expected '" + key + "', got '" + got + "'");
    }
  };
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kModelMagic || version != kModelVersion) {
    throw Error(ErrorCode::kParse, context + ": not a v1 model checkpoint");
  }
  FactorModel model;
  int dim = 0, users = 0, items = 0, has_ub = 0, has_ib = 0;
  expect_key("name");
  in >> model.name;
  expect_key("seed");
  in >> model.seed;
  expect_key("dim");
  in >> dim;
  expect_key("users");
  in >> users;
  expect_key("items");
  in >> items;
  expect_key("user_bias");
  in >> has_ub;
  expect_key("item_bias");
  in >> has_ib;
  if (!in || dim < 0 || users < 0 || items < 0) {
    throw Error(ErrorCode::kParse, context + ": malformed header");
  }
  auto read_value = [&]() {
    std::string token;
    if (!(in >> token)) {
      throw Error(ErrorCode::kParse, context + ": truncated checkpoint");
    }
    return ParseDouble(token, context);
  };
  model.user_factors.resize(users, dim);
  model.item_factors.resize(items, dim);
  for (int r = 0; r < users; ++r) {
    for (int c = 0; c < dim; ++c) model.user_factors(r, c) = read_value();
  }
  for (int r = 0; r < items; ++r) {
    for (int c = 0; c < dim; ++c) model.item_factors(r, c) = read_value();
  }
  if (has_ub) {
    model.user_bias.resize(users);
    for (int r = 0; r < users; ++r) model.user_bias[r] = read_value();
  }
  if (has_ib) {
    model.item_bias.resize(items);
    for (int r = 0; r < items; ++r) model.item_bias[r] = read_value();
  }
  return model;
}

}  // namespace fairrank
