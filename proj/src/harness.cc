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

#include "fairrank/harness.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fairrank/error.h"
#include "fairrank/util.h"

namespace fairrank {

namespace {

using Json = nlohmann::ordered_json;

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> SplitList(std::string_view text,
                                   std::string_view separators) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find_first_of(separators, start);
    if (end == std::string_view::npos) end = text.size();
    std::string token = Trim(text.substr(start, end - start));
    if (!token.empty()) out.push_back(std::move(token));
    start = end + 1;
  }
  return out;
}

double ConfigDouble(std::string_view token, const std::string& what) {
  try {
    return ParseDouble(Trim(token), what);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

}  // namespace

ModelSpec ParseModelSpec(std::string_view text) {
  const std::string t = Trim(text);
  ModelSpec spec;
  spec.name = t;
  if (t == "mostpop") {
    spec.kind = ModelKind::kMostPop;
  } else if (t == "bpr") {
    spec.kind = ModelKind::kBpr;
  } else if (t == "wmf") {
    spec.kind = ModelKind::kWmf;
  } else if (t == "pf") {
    spec.kind = ModelKind::kPf;
  } else if (t.rfind("import:", 0) == 0) {
    spec.kind = ModelKind::kImport;
    std::string rest = t.substr(7);
    const auto colon = rest.rfind(':');
    if (colon != std::string::npos && colon > 0) {
      spec.import_path = rest.substr(0, colon);
      spec.name = rest.substr(colon + 1);
    } else {
      spec.import_path = rest;
      spec.name = spec.import_path.stem().string();
    }
    if (spec.import_path.empty() || spec.name.empty()) {
      throw Error(ErrorCode::kConfig, "bad import model '" + t + "'");
    }
  } else {
    throw Error(ErrorCode::kConfig, "unknown model '" + t + "'");
  }
  return spec;
}

std::string GroupingSpec::Label() const {
  return method == GroupingMethod::kActivity ? "G1" : "G2";
}

GroupingSpec ParseGroupingSpec(std::string_view text) {
  const std::string t = Trim(text);
  const auto colon = t.find(':');
  const std::string head = t.substr(0, colon);
  GroupingSpec spec;
  if (head == "G1") {
    spec.method = GroupingMethod::kActivity;
    spec.user_fraction = 0.05;
    spec.size_rule = SizeRule::kRoundHalfDown;
    if (colon != std::string::npos) {
      spec.user_fraction = ConfigDouble(t.substr(colon + 1), t);
    }
  } else if (head == "G2") {
    spec.method = GroupingMethod::kPopularConsumption;
    spec.item_fraction = 0.2;
    spec.user_fraction = 0.2;
    spec.size_rule = SizeRule::kFloor;
    if (colon != std::string::npos) {
      auto parts = SplitList(t.substr(colon + 1), ",");
      if (parts.size() != 2) {
        throw Error(ErrorCode::kConfig,
                    "G2 expects <item_frac>,<user_frac>: '" + t + "'");
      }
      spec.item_fraction = ConfigDouble(parts[0], t);
      spec.user_fraction = ConfigDouble(parts[1], t);
    }
  } else {
    throw Error(ErrorCode::kConfig, "unknown grouping '" + t + "'");
  }
  for (double f : {spec.user_fraction, spec.item_fraction}) {
    if (!(f > 0.0 && f < 1.0)) {
      throw Error(ErrorCode::kConfig, "grouping fractions must be in (0, 1): '" +
                                          t + "'");
    }
  }
  return spec;
}

double ExperimentConfig::RelevanceThreshold() const {
  if (relevance_threshold) return *relevance_threshold;
  return schema == FeedbackSchema::kExplicit ? 4.0 : 0.0;
}

void ExperimentConfig::Validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kConfig, msg);
  };
  if (!data_path.empty() && !std::filesystem::is_regular_file(data_path)) {
    fail("data file not found: " + data_path.string());
  }
  if (data_path.empty()) {
    const auto& s = synthetic;
    if (s.n_users < 1 || s.n_items < 1) fail("synthetic sizes must be >= 1");
    if (s.rank < 1 || s.rank > std::min(s.n_users, s.n_items)) {
      fail("synthetic rank must be in [1, min(users, items)]");
    }
    if (!(s.density > 0.0 && s.density <= 1.0)) {
      fail("synthetic density must be in (0, 1]");
    }
  }
  if (k_core < 1) fail("k_core must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail("test_fraction must be in (0, 1)");
  }
  if (models.empty()) fail("no models configured");
  std::vector<std::string> names;
  for (const auto& m : models) {
    if (m.kind == ModelKind::kImport &&
        !std::filesystem::is_regular_file(m.import_path)) {
      fail("score file not found: " + m.import_path.string());
    }
    if (std::find(names.begin(), names.end(), m.name) != names.end()) {
      fail("duplicate model label '" + m.name + "'");
    }
    names.push_back(m.name);
  }
  if (groupings.empty()) fail("no groupings configured");
  if (!(short_head_fraction > 0.0 && short_head_fraction < 1.0)) {
    fail("short_head_fraction must be in (0, 1)");
  }
  if (k < 1) fail("K must be >= 1");
  if (n < k) fail("N must be >= K");
  if (!(epsilon >= 0.0)) fail("epsilon must be >= 0");
  if (solver.max_bisection_iters < 0) fail("max_iters must be >= 0");
  if (!(solver.tol > 0.0)) fail("tol must be > 0");
  if (bpr.dim < 1 || wmf.dim < 1 || pf.dim < 1) fail("dims must be >= 1");
}

std::string ExperimentConfig::Canonical() const {
  std::ostringstream out;
  auto line = [&](const std::string& key, const std::string& value) {
    out << key << " = " << value << "\n";
  };
  line("data.path", data_path.string());
  line("data.schema", schema == FeedbackSchema::kExplicit ? "explicit" : "implicit");
  line("data.delimiter", std::to_string(static_cast<int>(delimiter)));
  line("data.name", dataset_name);
  line("data.k_core", std::to_string(k_core));
  line("data.test_fraction", FormatDouble(test_fraction));
  line("data.relevance_threshold", FormatDouble(RelevanceThreshold()));
  if (data_path.empty()) {
    line("synthetic.users", std::to_string(synthetic.n_users));
    line("synthetic.items", std::to_string(synthetic.n_items));
    line("synthetic.rank", std::to_string(synthetic.rank));
    line("synthetic.density", FormatDouble(synthetic.density));
    line("synthetic.popularity_skew", FormatDouble(synthetic.popularity_skew));
    line("synthetic.seed", std::to_string(synthetic.seed));
  }
  line("run.seed", std::to_string(seed));
  std::string model_list;
  for (const auto& m : models) {
    if (!model_list.empty()) model_list += ",";
    model_list += m.kind == ModelKind::kImport
                      ? "import:" + m.import_path.string() + ":" + m.name
                      : m.name;
  }
  line("models.list", model_list);
  line("bpr.dim", std::to_string(bpr.dim));
  line("bpr.epochs", std::to_string(bpr.epochs));
  line("bpr.learning_rate", FormatDouble(bpr.learning_rate));
  line("bpr.reg", FormatDouble(bpr.reg));
  line("wmf.dim", std::to_string(wmf.dim));
  line("wmf.iterations", std::to_string(wmf.iterations));
  line("wmf.alpha", FormatDouble(wmf.confidence_alpha));
  line("wmf.reg", FormatDouble(wmf.reg));
  line("pf.dim", std::to_string(pf.dim));
  line("pf.iterations", std::to_string(pf.iterations));
  line("pf.shape", FormatDouble(pf.prior_shape));
  line("pf.rate", FormatDouble(pf.prior_rate));
  std::string grouping_list;
  for (const auto& g : groupings) {
    if (!grouping_list.empty()) grouping_list += ";";
    grouping_list += g.Label() + ":";
    if (g.method == GroupingMethod::kPopularConsumption) {
      grouping_list += FormatDouble(g.item_fraction) + ",";
    }
    grouping_list += FormatDouble(g.user_fraction) + "/" +
                     std::string(SizeRuleName(g.size_rule));
  }
  line("grouping.list", grouping_list);
  line("grouping.short_head_fraction", FormatDouble(short_head_fraction));
  line("rerank.k", std::to_string(k));
  line("rerank.n", std::to_string(n));
  line("rerank.epsilon", FormatDouble(epsilon));
  line("rerank.gain_model", std::string(GainModelName(gain_model)));
  line("rerank.max_iters", std::to_string(solver.max_bisection_iters));
  line("rerank.tol", FormatDouble(solver.tol));
  return out.str();
}

std::string ExperimentConfig::DigestHex() const { return Digest(Canonical()); }

const std::vector<std::string>& KnownConfigKeys() {
  static const std::vector<std::string> keys = {
      "data.path", "data.schema", "data.delimiter", "data.name",
      "data.k_core", "data.test_fraction", "data.relevance_threshold",
      "synthetic.users", "synthetic.items", "synthetic.rank",
      "synthetic.density", "synthetic.popularity_skew", "synthetic.seed",
      "run.seed", "run.out", "run.threads", "run.cache",
      "models.list",
      "bpr.dim", "bpr.epochs", "bpr.learning_rate", "bpr.reg",
      "wmf.dim", "wmf.iterations", "wmf.alpha", "wmf.reg",
      "pf.dim", "pf.iterations", "pf.shape", "pf.rate",
      "grouping.list", "grouping.short_head_fraction",
      "grouping.g1_size_rule", "grouping.g2_size_rule",
      "rerank.k", "rerank.n", "rerank.epsilon", "rerank.gain_model",
      "rerank.max_iters", "rerank.tol",
      "io.split", "io.candidates", "io.fair", "io.grouping", "io.model_file",
      "io.scores", "io.records", "io.format", "io.kind", "io.solver",
      "io.stage", "io.label", "io.dump_problem"};
  return keys;
}

namespace {

char ParseDelimiter(const std::string& text) {
  if (text == "tab" || text == "\\t") return '\t';
  if (text == "comma") return ',';
  if (text == "space") return ' ';
  if (text == "semicolon") return ';';
  if (text.size() == 1) return text[0];
  throw Error(ErrorCode::kConfig, "bad delimiter '" + text + "'");
}

int ConfigInt(const Config& c, const std::string& key, int fallback) {
  const int64_t v = c.GetInt(key, fallback);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw Error(ErrorCode::kConfig, key + " out of range");
  }
  return static_cast<int>(v);
}

}  // namespace

ExperimentConfig ConfigToExperiment(const Config& config) {
  config.CheckKnownKeys(KnownConfigKeys());
  ExperimentConfig e;
  e.data_path = config.GetString("data.path", "");
  try {
    e.schema = ParseSchema(config.GetString("data.schema", "implicit"));
    e.gain_model = ParseGainModel(
        config.GetString("rerank.gain_model", std::string(GainModelName(e.gain_model))));
  } catch (const Error& err) {
    throw Error(ErrorCode::kConfig, err.what());
  }
  e.delimiter = ParseDelimiter(config.GetString("data.delimiter", "tab"));
  e.dataset_name = config.GetString(
      "data.name", e.data_path.empty() ? "synthetic" : e.data_path.stem().string());
  e.k_core = ConfigInt(config, "data.k_core", e.k_core);
  e.test_fraction = config.GetDouble("data.test_fraction", e.test_fraction);
  if (config.Has("data.relevance_threshold")) {
    e.relevance_threshold = config.GetDouble("data.relevance_threshold", 0.0);
  }
  e.seed = static_cast<uint64_t>(config.GetInt("run.seed", 0));
  e.synthetic.n_users = ConfigInt(config, "synthetic.users", e.synthetic.n_users);
  e.synthetic.n_items = ConfigInt(config, "synthetic.items", e.synthetic.n_items);
  e.synthetic.rank = ConfigInt(config, "synthetic.rank", e.synthetic.rank);
  e.synthetic.density = config.GetDouble("synthetic.density", e.synthetic.density);
  e.synthetic.popularity_skew =
      config.GetDouble("synthetic.popularity_skew", e.synthetic.popularity_skew);
  e.synthetic.seed = static_cast<uint64_t>(
      config.GetInt("synthetic.seed", static_cast<int64_t>(e.seed)));

  e.out_dir = config.GetString("run.out", e.out_dir.string());
  e.threads = ConfigInt(config, "run.threads", e.threads);
  e.cache = config.GetBool("run.cache", e.cache);

  for (const auto& m : SplitList(
           config.GetString("models.list", "mostpop,bpr,wmf,pf"), ",")) {
    e.models.push_back(ParseModelSpec(m));
  }
  e.bpr.dim = ConfigInt(config, "bpr.dim", e.bpr.dim);
  e.bpr.epochs = ConfigInt(config, "bpr.epochs", e.bpr.epochs);
  e.bpr.learning_rate = config.GetDouble("bpr.learning_rate", e.bpr.learning_rate);
  e.bpr.reg = config.GetDouble("bpr.reg", e.bpr.reg);
  e.wmf.dim = ConfigInt(config, "wmf.dim", e.wmf.dim);
  e.wmf.iterations = ConfigInt(config, "wmf.iterations", e.wmf.iterations);
  e.wmf.confidence_alpha = config.GetDouble("wmf.alpha", e.wmf.confidence_alpha);
  e.wmf.reg = config.GetDouble("wmf.reg", e.wmf.reg);
  e.pf.dim = ConfigInt(config, "pf.dim", e.pf.dim);
  e.pf.iterations = ConfigInt(config, "pf.iterations", e.pf.iterations);
  e.pf.prior_shape = config.GetDouble("pf.shape", e.pf.prior_shape);
  e.pf.prior_rate = config.GetDouble("pf.rate", e.pf.prior_rate);

  for (const auto& g :
       SplitList(config.GetString("grouping.list", "G1;G2"), "; ")) {
    e.groupings.push_back(ParseGroupingSpec(g));
  }
  try {
    for (auto& g : e.groupings) {
      const std::string key = g.method == GroupingMethod::kActivity
                                  ? "grouping.g1_size_rule"
                                  : "grouping.g2_size_rule";
      if (config.Has(key)) g.size_rule = ParseSizeRule(*config.Get(key));
    }
  } catch (const Error& err) {
    throw Error(ErrorCode::kConfig, err.what());
  }
  e.short_head_fraction =
      config.GetDouble("grouping.short_head_fraction", e.short_head_fraction);

  e.k = ConfigInt(config, "rerank.k", e.k);
  e.n = ConfigInt(config, "rerank.n", e.n);
  e.epsilon = config.GetDouble("rerank.epsilon", e.epsilon);
  e.solver.max_bisection_iters =
      ConfigInt(config, "rerank.max_iters", e.solver.max_bisection_iters);
  e.solver.tol = config.GetDouble("rerank.tol", e.solver.tol);
  e.solver.threads = e.threads;
  e.bpr.seed = e.wmf.seed = e.pf.seed = e.seed;
  e.wmf.threads = e.pf.threads = e.threads;
  return e;
}

DatasetStats ComputeStats(const InteractionSet& data) {
  DatasetStats s;
  s.n_users = data.n_users();
  s.n_items = data.n_items();
  s.n_interactions = static_cast<int64_t>(data.size());
  if (s.n_users > 0) s.per_user = static_cast<double>(s.n_interactions) / s.n_users;
  if (s.n_items > 0) s.per_item = static_cast<double>(s.n_interactions) / s.n_items;
  s.sparsity = data.Sparsity();
  return s;
}

std::vector<std::string> RunRecord::Groupings() const {
  std::vector<std::string> out;
  for (const auto& c : cells) {
    if (std::find(out.begin(), out.end(), c.grouping) == out.end()) {
      out.push_back(c.grouping);
    }
  }
  return out;
}

namespace {

constexpr uint64_t kCalibrationSeedMix = 0x5bd1e9955bd1e995ULL;

// Runs `fn`, rethrowing errors tagged with the stage name and input digest.
template <typename Fn>
auto RunStage(const std::string& stage, const std::string& digest, Fn&& fn) {
  try {
    return fn();
  } catch (const InfeasibleEpsilonError&) {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), "stage '" + stage + "' (inputs " + digest +
                              "): " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInternal, "stage '" + stage + "' (inputs " +
                                          digest + "): " + e.what());
  }
}

InteractionSet LoadSource(const ExperimentConfig& config) {
  if (config.data_path.empty()) return GenerateSynthetic(config.synthetic);
  return LoadInteractions(config.data_path, config.schema, config.delimiter);
}

std::string SourceDigest(const ExperimentConfig& config) {
  if (config.data_path.empty()) {
    std::ostringstream key;
    key << "synthetic " << config.synthetic.n_users << " "
        << config.synthetic.n_items << " " << config.synthetic.rank << " "
        << FormatDouble(config.synthetic.density) << " "
        << FormatDouble(config.synthetic.popularity_skew) << " "
        << config.synthetic.seed;
    return Digest(key.str());
  }
  return Digest(ReadFile(config.data_path) + "\n" +
                std::to_string(static_cast<int>(config.schema)) + " " +
                std::to_string(static_cast<int>(config.delimiter)));
}

std::string ModelKey(const ExperimentConfig& config, const ModelSpec& m) {
  std::ostringstream key;
  key << m.name << " n=" << config.n << " ";
  switch (m.kind) {
    case ModelKind::kMostPop:
      key << "mostpop";
      break;
    case ModelKind::kBpr:
      key << "bpr " << config.bpr.dim << " " << config.bpr.epochs << " "
          << FormatDouble(config.bpr.learning_rate) << " "
          << FormatDouble(config.bpr.reg) << " " << config.bpr.seed;
      break;
    case ModelKind::kWmf:
      key << "wmf " << config.wmf.dim << " " << config.wmf.iterations << " "
          << FormatDouble(config.wmf.confidence_alpha) << " "
          << FormatDouble(config.wmf.reg) << " " << config.wmf.seed;
      break;
    case ModelKind::kPf:
      key << "pf " << config.pf.dim << " " << config.pf.iterations << " "
          << FormatDouble(config.pf.prior_shape) << " "
          << FormatDouble(config.pf.prior_rate) << " " << config.pf.seed;
      break;
    case ModelKind::kImport:
      key << "import " << Digest(ReadFile(m.import_path));
      break;
  }
  return key.str();
}

CandidateLists BuildCandidates(const ExperimentConfig& config,
                               const ModelSpec& m, const InteractionSet& train,
                               int threads) {
  if (m.kind == ModelKind::kImport) {
    return ImportScores(m.import_path, train, config.n);
  }
  FactorModel model;
  switch (m.kind) {
    case ModelKind::kMostPop:
      model = TrainMostPop(train);
      break;
    case ModelKind::kBpr:
      model = TrainBpr(train, config.bpr);
      break;
    case ModelKind::kWmf: {
      WmfOptions options = config.wmf;
      options.threads = threads;
      model = TrainWmf(train, options);
      break;
    }
    case ModelKind::kPf: {
      PfOptions options = config.pf;
      options.threads = threads;
      model = TrainPf(train, options);
      break;
    }
    case ModelKind::kImport:
      break;
  }
  return PredictTopN(model, train, config.n, threads);
}

Grouping BuildGrouping(const GroupingSpec& spec, const InteractionSet& train) {
  if (spec.method == GroupingMethod::kActivity) {
    return GroupByActivity(train, spec.user_fraction, spec.size_rule);
  }
  return GroupByPopularConsumption(train, spec.item_fraction,
                                   spec.user_fraction, spec.size_rule);
}

std::string SafeName(std::string name) {
  for (char& c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') {
      c = '_';
    }
  }
  return name;
}

}  // namespace

GainCalibration CalibrateGains(const ExperimentConfig& config,
                               const ModelSpec& model,
                               const InteractionSet& train) {
  if (model.kind == ModelKind::kImport) {
    throw Error(ErrorCode::kConfig,
                "calibrated gains need an in-repo model; imported scores for '" +
                    model.name + "' cannot be refit on the calibration split");
  }
  const double threshold = config.RelevanceThreshold();
  const DataSplit inner = SplitHoldout(train, config.test_fraction,
                                       config.seed ^ kCalibrationSeedMix);
  const RelevanceOracle oracle = BuildRelevanceOracle(inner.test, threshold);
  GainCalibration calibration = FitCalibration(
      BuildCandidates(config, model, inner.train, config.threads),
      oracle.relevant,
      ExpectedRelevantCounts(inner.train, config.test_fraction, threshold),
      config.k);
  calibration.expected_relevant =
      ExpectedRelevantCounts(train, config.test_fraction, threshold);
  return calibration;
}

RunRecord RunExperiment(const ExperimentConfig& config) {
  config.Validate();
  namespace fs = std::filesystem;
  const fs::path out = config.out_dir;
  const fs::path stages = out / "stages";
  fs::create_directories(stages);
  const int threads = std::max(1, config.threads);

  RunRecord record;
  record.config_digest = config.DigestHex();
  record.dataset = config.dataset_name;
  record.epsilon = config.epsilon;
  record.k = config.k;
  WriteFileAtomic(out / "config.txt", config.Canonical());

  // Load, filter, split.
  const std::string source_digest =
      RunStage("load", config.data_path.string(),
               [&] { return SourceDigest(config); });
  const std::string split_digest = Digest(
      source_digest + " k_core=" + std::to_string(config.k_core) +
      " test=" + FormatDouble(config.test_fraction) +
      " seed=" + std::to_string(config.seed));
  const fs::path split_dir = stages / ("split-" + split_digest);
  DataSplit split;
  RunStage("prep", split_digest, [&] {
    const bool cached =
        config.cache && fs::exists(split_dir / "seed.txt") &&
        fs::exists(split_dir / "stats.txt");
    InteractionSet filtered;
    if (!cached) {
      filtered = KCoreFilter(LoadSource(config), config.k_core);
      split = SplitHoldout(filtered, config.test_fraction, config.seed);
      fs::create_directories(split_dir);
      const DatasetStats s = ComputeStats(filtered);
      SaveSplit(split, split_dir);
      WriteFileAtomic(split_dir / "stats.txt",
                      std::to_string(s.n_users) + " " +
                          std::to_string(s.n_items) + " " +
                          std::to_string(s.n_interactions) + " " +
                          FormatDouble(s.per_user) + " " +
                          FormatDouble(s.per_item) + " " +
                          FormatDouble(s.sparsity) + "\n");
      record.stats = s;
    } else {
      split = LoadSplit(split_dir);
      const std::string text = Trim(ReadFile(split_dir / "stats.txt"));
      const auto f = SplitFields(text, ' ');
      if (f.size() != 6) {
        throw Error(ErrorCode::kParse, "corrupt stats cache " +
                                           (split_dir / "stats.txt").string());
      }
      DatasetStats s;
      s.n_users = static_cast<int>(ParseInt(f[0], "stats"));
      s.n_items = static_cast<int>(ParseInt(f[1], "stats"));
      s.n_interactions = ParseInt(f[2], "stats");
      s.per_user = ParseDouble(f[3], "stats");
      s.per_item = ParseDouble(f[4], "stats");
      s.sparsity = ParseDouble(f[5], "stats");
      record.stats = s;
    }
    return 0;
  });
  const InteractionSet& train = split.train;
  const PopularityTable popularity = Popularity(train);
  const ItemPartition partition =
      SplitItemsShortLong(popularity, config.short_head_fraction);
  const RelevanceOracle oracle =
      BuildRelevanceOracle(split.test, config.RelevanceThreshold());

  // Calibration split: a second holdout carved out of train, used only to
  // fit the per-rank hit rates of calibrated gains.
  std::optional<DataSplit> inner;
  std::optional<RelevanceOracle> inner_oracle;
  std::vector<double> expected, inner_expected;
  const double threshold = config.RelevanceThreshold();
  if (config.gain_model == GainModel::kCalibrated) {
    RunStage("calibration-split", split_digest, [&] {
      inner = SplitHoldout(train, config.test_fraction,
                           config.seed ^ kCalibrationSeedMix);
      inner_oracle = BuildRelevanceOracle(inner->test, threshold);
      expected = ExpectedRelevantCounts(train, config.test_fraction, threshold);
      inner_expected = ExpectedRelevantCounts(inner->train, config.test_fraction,
                                              threshold);
      return 0;
    });
  }

  // Candidate lists (and calibrations) per model.
  const size_t n_models = config.models.size();
  std::vector<CandidateLists> candidates(n_models);
  std::vector<GainCalibration> calibrations(n_models);
  std::vector<std::exception_ptr> errors(n_models);
  fs::create_directories(out / "candidates");
  auto cached_candidates = [&](const ModelSpec& spec, const std::string& tag,
                               const InteractionSet& data) {
    const std::string digest =
        Digest(split_digest + " " + tag + " " + ModelKey(config, spec));
    const fs::path cache_file = stages / ("candidates-" + digest + ".tsv");
    return RunStage("rank:" + spec.name + tag, digest, [&] {
      CandidateLists lists;
      if (config.cache && fs::exists(cache_file)) {
        std::istringstream in(ReadFile(cache_file));
        lists = ParseScores(in, data, config.n);
      } else {
        lists = BuildCandidates(config, spec, data, 1);
        if (config.cache) WriteFileAtomic(cache_file, FormatScores(lists, data));
      }
      lists.provenance = spec.name;
      return lists;
    });
  };
  ParallelFor(n_models, threads, [&](size_t m) {
    const ModelSpec& spec = config.models[m];
    try {
      candidates[m] = cached_candidates(spec, "", train);
      WriteFileAtomic(out / "candidates" / (SafeName(spec.name) + ".tsv"),
                      FormatScores(candidates[m], train));
      if (config.gain_model == GainModel::kCalibrated) {
        if (spec.kind == ModelKind::kImport) {
          throw Error(ErrorCode::kConfig,
                      "calibrated gains need an in-repo model; imported "
                      "scores for '" + spec.name +
                          "' cannot be refit on the calibration split");
        }
        const CandidateLists inner_lists =
            cached_candidates(spec, "calibration", inner->train);
        calibrations[m] = FitCalibration(inner_lists, inner_oracle->relevant,
                                         inner_expected, config.k);
        calibrations[m].expected_relevant = expected;
      }
    } catch (...) {
      errors[m] = std::current_exception();
    }
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Groupings.
  std::vector<Grouping> groupings;
  fs::create_directories(out / "groupings");
  for (const auto& spec : config.groupings) {
    groupings.push_back(RunStage("group:" + spec.Label(), split_digest, [&] {
      return BuildGrouping(spec, train);
    }));
    WriteFileAtomic(out / "groupings" / (spec.Label() + ".tsv"),
                    FormatGrouping(groupings.back(), train.users));
  }
  WriteFileAtomic(out / "groupings" / "items.tsv",
                  FormatItemPartition(partition, train.items));

  // Cells: model x grouping.
  const size_t n_groupings = groupings.size();
  const size_t n_cells = n_models * n_groupings;
  record.cells.resize(n_cells);
  std::vector<std::exception_ptr> cell_errors(n_cells);
  fs::create_directories(out / "selections");
  ParallelFor(n_cells, threads, [&](size_t idx) {
    const size_t m = idx / n_groupings;
    const size_t g = idx % n_groupings;
    const std::string& model = config.models[m].name;
    const Grouping& grouping = groupings[g];
    CellRecord& cell = record.cells[idx];
    cell.model = model;
    cell.grouping = grouping.Label();
    const std::string stage = "rerank:" + model + "/" + cell.grouping;
    try {
      const RerankProblem problem = RunStage(stage, split_digest, [&] {
        return BuildProblem(candidates[m], grouping, config.k, config.epsilon,
                            config.gain_model, &calibrations[m]);
      });
      const Selection identity = SolveIdentity(problem);
      Selection fair;
      try {
        fair = RunStage(stage, split_digest,
                        [&] { return SolveLagrangian(problem, config.solver); });
      } catch (const InfeasibleEpsilonError& e) {
        fair = e.best();
        fair.violation = true;
      }
      const RecLists org_lists = ApplySelection(identity, problem).Items();
      const CandidateLists fair_candidates =
          ApplySelection(fair, problem, model + "+ufr");
      const RecLists fair_lists = fair_candidates.Items();
      WriteFileAtomic(out / "selections" /
                          (SafeName(model) + "_" + cell.grouping + ".tsv"),
                      FormatScores(fair_candidates, train));

      EvaluationInput input;
      input.oracle = &oracle;
      input.grouping = &grouping;
      input.partition = &partition;
      input.popularity = &popularity;
      input.train = &train;
      input.k = config.k;
      input.lists = &org_lists;
      cell.org = RunStage("eval:" + model + "/" + cell.grouping, split_digest,
                          [&] { return Evaluate(input, model, Stage::kOrg); });
      input.lists = &fair_lists;
      cell.fair = RunStage("eval:" + model + "/" + cell.grouping, split_digest,
                           [&] { return Evaluate(input, model, Stage::kFair); });
      const Improvement imp = UgfImprovement(cell.org.ugf, cell.fair.ugf);
      cell.org.delta_pct.reset();
      cell.fair.delta_pct = imp.percent;

      auto& d = cell.diagnostics;
      d.solver = std::string(SolverName(fair.solver));
      d.lambda_star = fair.lambda_star;
      d.iterations = fair.iterations;
      d.violation = fair.violation;
      d.est_ugf_org = identity.est_ugf;
      d.est_ugf_fair = fair.est_ugf;
      d.objective_org = identity.objective;
      d.objective_fair = fair.objective;
      d.delta_defined = imp.defined;
    } catch (...) {
      cell_errors[idx] = std::current_exception();
    }
  });
  for (auto& e : cell_errors) {
    if (e) std::rethrow_exception(e);
  }

  for (const auto& spec : config.groupings) {
    WriteFileAtomic(out / ("report_" + spec.Label() + ".csv"),
                    FormatReportCsv(ReportRows(record, spec.Label())));
  }
  WriteFileAtomic(out / "diagnostics.csv", FormatDiagnosticsCsv(record));
  WriteFileAtomic(out / "report.md", FormatMarkdown(record));
  WriteFileAtomic(out / "record.json", RecordToJson(record));
  return record;
}

std::optional<double> RelativeChangePct(double org, double fair) {
  if (org == 0.0 || !std::isfinite(org) || !std::isfinite(fair)) {
    return std::nullopt;
  }
  return (fair - org) / std::abs(org) * 100.0;
}

std::optional<double> MagnitudeReductionPct(double org, double fair) {
  if (org == 0.0 || !std::isfinite(org) || !std::isfinite(fair)) {
    return std::nullopt;
  }
  return (std::abs(org) - std::abs(fair)) / std::abs(org) * 100.0;
}

namespace {

CorrelationRow Correlate(const std::string& grouping, const std::string& x_name,
                         const std::string& y_name,
                         const std::vector<double>& x,
                         const std::vector<double>& y) {
  CorrelationRow row;
  row.grouping = grouping;
  row.x = x_name;
  row.y = y_name;
  row.n = static_cast<int>(x.size());
  if (x.size() < 3) {
    row.note = "fewer than 3 points";
    return row;
  }
  row.value = Pearson(x, y);
  if (!row.value) row.note = "zero variance";
  return row;
}

std::vector<std::string> AllGroupings(const std::vector<RunRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records) {
    for (const auto& g : r.Groupings()) {
      if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
    }
  }
  return out;
}

}  // namespace

std::vector<CorrelationRow> CorrelateCharacteristics(
    const std::vector<RunRecord>& records) {
  Require(records.size() >= 3,
          "characteristic correlation needs at least 3 run records");
  std::vector<CorrelationRow> rows;
  for (const auto& g : AllGroupings(records)) {
    std::vector<double> per_user, per_item, improvement;
    for (const auto& r : records) {
      CompensatedSum sum;
      int count = 0;
      for (const auto& c : r.cells) {
        if (c.grouping != g || !c.diagnostics.delta_defined ||
            !c.fair.delta_pct) {
          continue;
        }
        sum.Add(*c.fair.delta_pct);
        ++count;
      }
      if (count == 0) continue;
      improvement.push_back(sum.Value() / count);
      per_user.push_back(r.stats.per_user);
      per_item.push_back(r.stats.per_item);
    }
    rows.push_back(Correlate(g, "interactions_per_user", "delta_pct_ugf",
                             per_user, improvement));
    rows.push_back(Correlate(g, "interactions_per_item", "delta_pct_ugf",
                             per_item, improvement));
  }
  return rows;
}

std::vector<CorrelationRow> CorrelateTradeoffs(
    const std::vector<RunRecord>& records) {
  std::vector<CorrelationRow> rows;
  struct Target {
    const char* name;
    std::optional<double> (*value)(const CellRecord&);
  };
  const Target targets[] = {
      {"delta_pct_ndcg",
       [](const CellRecord& c) {
         return RelativeChangePct(c.org.ndcg_all, c.fair.ndcg_all);
       }},
      {"delta_pct_novelty",
       [](const CellRecord& c) {
         return RelativeChangePct(c.org.novelty, c.fair.novelty);
       }},
      {"delta_pct_dgap_adv",
       [](const CellRecord& c) {
         return MagnitudeReductionPct(c.org.dgap_adv, c.fair.dgap_adv);
       }},
      {"delta_pct_dgap_dis",
       [](const CellRecord& c) {
         return MagnitudeReductionPct(c.org.dgap_dis, c.fair.dgap_dis);
       }},
  };
  for (const auto& g : AllGroupings(records)) {
    for (const auto& t : targets) {
      std::vector<double> x, y;
      for (const auto& r : records) {
        for (const auto& c : r.cells) {
          if (c.grouping != g || !c.diagnostics.delta_defined ||
              !c.fair.delta_pct) {
            continue;
          }
          const auto v = t.value(c);
          if (!v) continue;
          x.push_back(*c.fair.delta_pct);
          y.push_back(*v);
        }
      }
      rows.push_back(Correlate(g, "delta_pct_ugf", t.name, x, y));
    }
  }
  return rows;
}

std::string FormatCorrelationCsv(const std::vector<CorrelationRow>& rows) {
  std::string out = "grouping,x,y,n,r,p,note\n";
  for (const auto& row : rows) {
    out += row.grouping + "," + row.x + "," + row.y + "," +
           std::to_string(row.n) + ",";
    if (row.value) {
      out += FormatDouble(row.value->r) + "," + FormatDouble(row.value->p);
    } else {
      out += ",";
    }
    out += "," + row.note + "\n";
  }
  return out;
}

ReportFormat ParseReportFormat(std::string_view name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  throw Error(ErrorCode::kConfig, "unknown report format '" +
                                      std::string(name) + "'");
}

std::vector<MetricReport> ReportRows(const RunRecord& record,
                                     std::string_view grouping) {
  std::vector<MetricReport> rows;
  for (const auto& c : record.cells) {
    if (c.grouping != grouping) continue;
    rows.push_back(c.org);
    rows.push_back(c.fair);
  }
  return rows;
}

std::string FormatDiagnosticsCsv(const RunRecord& record) {
  std::string out =
      "model,grouping,solver,lambda_star,iterations,violation,est_ugf_org,"
      "est_ugf_fair,objective_org,objective_fair,delta_defined\n";
  for (const auto& c : record.cells) {
    const auto& d = c.diagnostics;
    out += c.model + "," + c.grouping + "," + d.solver + "," +
           (d.lambda_star ? FormatDouble(*d.lambda_star) : "") + "," +
           std::to_string(d.iterations) + "," + (d.violation ? "1" : "0") +
           "," + FormatDouble(d.est_ugf_org) + "," +
           FormatDouble(d.est_ugf_fair) + "," + FormatDouble(d.objective_org) +
           "," + FormatDouble(d.objective_fair) + "," +
           (d.delta_defined ? "1" : "0") + "\n";
  }
  return out;
}

namespace {

std::string Fixed(double v, int digits) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

std::string FormatMarkdown(const RunRecord& record) {
  std::ostringstream out;
  out << "# " << record.dataset << "\n\n";
  out << "Users " << record.stats.n_users << ", items " << record.stats.n_items
      << ", interactions " << record.stats.n_interactions << ", K "
      << record.k << ", epsilon " << FormatDouble(record.epsilon)
      << ", config " << record.config_digest << "\n";
  for (const auto& g : record.Groupings()) {
    out << "\n## " << g << "\n\n";
    out << "| Model | Stage | All | Adv. | Dis. | UGF | Δ% | Nov. | Cov. | "
           "Short. | Long. | ΔGAP Adv. | ΔGAP Dis. |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : ReportRows(record, g)) {
      out << "| " << r.model << " | " << StageName(r.stage) << " | "
          << Fixed(r.ndcg_all, 4) << " | " << Fixed(r.ndcg_adv, 4) << " | "
          << Fixed(r.ndcg_dis, 4) << " | " << Fixed(r.ugf, 4) << " | "
          << (r.delta_pct ? Fixed(*r.delta_pct, 1) : "--") << " | "
          << Fixed(r.novelty, 4) << " | " << Fixed(r.coverage_pct, 2) << " | "
          << r.short_slots << " | " << r.long_slots << " | "
          << Fixed(r.dgap_adv, 3) << " | " << Fixed(r.dgap_dis, 3) << " |\n";
    }
  }
  return out.str();
}

namespace {

// Non-finite doubles are stored as strings ("inf", "nan").
Json Num(double v) {
  if (std::isfinite(v)) return v;
  return FormatDouble(v);
}

double ReadNum(const Json& j) {
  if (j.is_string()) return ParseDouble(j.get<std::string>(), "record");
  if (!j.is_number()) throw Error(ErrorCode::kParse, "record: expected number");
  return j.get<double>();
}

Json ReportJson(const MetricReport& r) {
  Json j;
  j["model"] = r.model;
  j["stage"] = std::string(StageName(r.stage));
  j["ndcg_all"] = Num(r.ndcg_all);
  j["ndcg_adv"] = Num(r.ndcg_adv);
  j["ndcg_dis"] = Num(r.ndcg_dis);
  j["ugf"] = Num(r.ugf);
  j["delta_pct"] = r.delta_pct ? Num(*r.delta_pct) : Json(nullptr);
  j["f1_all"] = Num(r.f1_all);
  j["novelty"] = Num(r.novelty);
  j["coverage_pct"] = Num(r.coverage_pct);
  j["short_slots"] = r.short_slots;
  j["long_slots"] = r.long_slots;
  j["dgap_adv"] = Num(r.dgap_adv);
  j["dgap_dis"] = Num(r.dgap_dis);
  return j;
}

MetricReport ReportFromJson(const Json& j) {
  MetricReport r;
  r.model = j.at("model").get<std::string>();
  const std::string stage = j.at("stage").get<std::string>();
  if (stage == "Org") {
    r.stage = Stage::kOrg;
  } else if (stage == "Fair") {
    r.stage = Stage::kFair;
  } else {
    throw Error(ErrorCode::kParse, "record: bad stage '" + stage + "'");
  }
  r.ndcg_all = ReadNum(j.at("ndcg_all"));
  r.ndcg_adv = ReadNum(j.at("ndcg_adv"));
  r.ndcg_dis = ReadNum(j.at("ndcg_dis"));
  r.ugf = ReadNum(j.at("ugf"));
  if (!j.at("delta_pct").is_null()) r.delta_pct = ReadNum(j.at("delta_pct"));
  r.f1_all = ReadNum(j.at("f1_all"));
  r.novelty = ReadNum(j.at("novelty"));
  r.coverage_pct = ReadNum(j.at("coverage_pct"));
  r.short_slots = j.at("short_slots").get<int64_t>();
  r.long_slots = j.at("long_slots").get<int64_t>();
  r.dgap_adv = ReadNum(j.at("dgap_adv"));
  r.dgap_dis = ReadNum(j.at("dgap_dis"));
  return r;
}

}  // namespace

std::string RecordToJson(const RunRecord& record) {
  Json j;
  j["format"] = "fairrank-record";
  j["version"] = 1;
  j["config_digest"] = record.config_digest;
  j["dataset"] = record.dataset;
  j["epsilon"] = Num(record.epsilon);
  j["k"] = record.k;
  j["stats"] = {{"n_users", record.stats.n_users},
                {"n_items", record.stats.n_items},
                {"n_interactions", record.stats.n_interactions},
                {"per_user", Num(record.stats.per_user)},
                {"per_item", Num(record.stats.per_item)},
                {"sparsity", Num(record.stats.sparsity)}};
  Json cells = Json::array();
  for (const auto& c : record.cells) {
    const auto& d = c.diagnostics;
    Json diag;
    diag["solver"] = d.solver;
    diag["lambda_star"] = d.lambda_star ? Num(*d.lambda_star) : Json(nullptr);
    diag["iterations"] = d.iterations;
    diag["violation"] = d.violation;
    diag["est_ugf_org"] = Num(d.est_ugf_org);
    diag["est_ugf_fair"] = Num(d.est_ugf_fair);
    diag["objective_org"] = Num(d.objective_org);
    diag["objective_fair"] = Num(d.objective_fair);
    diag["delta_defined"] = d.delta_defined;
    cells.push_back({{"model", c.model},
                     {"grouping", c.grouping},
                     {"org", ReportJson(c.org)},
                     {"fair", ReportJson(c.fair)},
                     {"diagnostics", diag}});
  }
  j["cells"] = cells;
  return j.dump(2) + "\n";
}

RunRecord RecordFromJson(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("record: ") + e.what());
  }
  try {
    if (j.at("format") != "fairrank-record" || j.at("version") != 1) {
      throw Error(ErrorCode::kParse, "record: unsupported format or version");
    }
    RunRecord r;
    r.config_digest = j.at("config_digest").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.epsilon = ReadNum(j.at("epsilon"));
    r.k = j.at("k").get<int>();
    const auto& s = j.at("stats");
    r.stats.n_users = s.at("n_users").get<int>();
    r.stats.n_items = s.at("n_items").get<int>();
    r.stats.n_interactions = s.at("n_interactions").get<int64_t>();
    r.stats.per_user = ReadNum(s.at("per_user"));
    r.stats.per_item = ReadNum(s.at("per_item"));
    r.stats.sparsity = ReadNum(s.at("sparsity"));
    for (const auto& c : j.at("cells")) {
      CellRecord cell;
      cell.model = c.at("model").get<std::string>();
      cell.grouping = c.at("grouping").get<std::string>();
      cell.org = ReportFromJson(c.at("org"));
      cell.fair = ReportFromJson(c.at("fair"));
      const auto& d = c.at("diagnostics");
      auto& diag = cell.diagnostics;
      diag.solver = d.at("solver").get<std::string>();
      if (!d.at("lambda_star").is_null()) {
        diag.lambda_star = ReadNum(d.at("lambda_star"));
      }
      diag.iterations = d.at("iterations").get<int>();
      diag.violation = d.at("violation").get<bool>();
      diag.est_ugf_org = ReadNum(d.at("est_ugf_org"));
      diag.est_ugf_fair = ReadNum(d.at("est_ugf_fair"));
      diag.objective_org = ReadNum(d.at("objective_org"));
      diag.objective_fair = ReadNum(d.at("objective_fair"));
      diag.delta_defined = d.at("delta_defined").get<bool>();
      r.cells.push_back(std::move(cell));
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("record: ") + e.what());
  }
}

std::vector<std::filesystem::path> EmitReport(const RunRecord& record,
                                              ReportFormat format,
                                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto write = [&](const std::filesystem::path& p, const std::string& text) {
    WriteFileAtomic(p, text);
    written.push_back(p);
  };
  switch (format) {
    case ReportFormat::kCsv:
      for (const auto& g : record.Groupings()) {
        write(dir / ("report_" + g + ".csv"),
              FormatReportCsv(ReportRows(record, g)));
      }
      write(dir / "diagnostics.csv", FormatDiagnosticsCsv(record));
      break;
    case ReportFormat::kJson:
      write(dir / "record.json", RecordToJson(record));
      break;
    case ReportFormat::kMarkdown:
      write(dir / "report.md", FormatMarkdown(record));
      break;
  }
  return written;
}

}  // namespace fairrank
