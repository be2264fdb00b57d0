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

// Command-line front end. Every flag maps to a config key (see --help of
// each subcommand); values from --config are read first, then --set
// assignments, then explicit flags.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <list>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fairrank/config.h"
#include "fairrank/error.h"
#include "fairrank/grouping.h"
#include "fairrank/harness.h"
#include "fairrank/ingest.h"
#include "fairrank/metrics.h"
#include "fairrank/rankers.h"
#include "fairrank/ufr.h"
#include "fairrank/util.h"

namespace fs = std::filesystem;
using namespace fairrank;

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

// Flag -> config key table shared by all subcommands.
const FlagSpec kFlags[] = {
    {"--data", "data.path", "ratings file (user item [rating [timestamp]])"},
    {"--schema", "data.schema", "explicit | implicit"},
    {"--delimiter", "data.delimiter", "tab | comma | space | <char>"},
    {"--name", "data.name", "dataset label used in reports"},
    {"--k-core", "data.k_core", "k-core threshold"},
    {"--test-fraction", "data.test_fraction", "held-out fraction per user"},
    {"--relevance-threshold", "data.relevance_threshold",
     "minimum test rating counted as relevant"},
    {"--users", "synthetic.users", "synthetic user count"},
    {"--items", "synthetic.items", "synthetic item count"},
    {"--rank", "synthetic.rank", "synthetic latent rank"},
    {"--density", "synthetic.density", "synthetic density in (0, 1]"},
    {"--popularity-skew", "synthetic.popularity_skew",
     "synthetic item exposure skew"},
    {"--threads", "run.threads", "worker threads"},
    {"--cache", "run.cache", "reuse cached stages (true/false)"},
    {"--models", "models.list", "comma list: mostpop,bpr,wmf,pf,import:<path>"},
    {"--model", "models.list", "model to train: mostpop | bpr | wmf | pf"},
    {"--bpr-dim", "bpr.dim", "BPR embedding size"},
    {"--bpr-epochs", "bpr.epochs", "BPR epochs"},
    {"--bpr-lr", "bpr.learning_rate", "BPR learning rate"},
    {"--bpr-reg", "bpr.reg", "BPR L2 regularization"},
    {"--wmf-dim", "wmf.dim", "WMF embedding size"},
    {"--wmf-iterations", "wmf.iterations", "WMF ALS sweeps"},
    {"--wmf-alpha", "wmf.alpha", "WMF confidence scale"},
    {"--wmf-reg", "wmf.reg", "WMF L2 regularization"},
    {"--pf-dim", "pf.dim", "PF latent size"},
    {"--pf-iterations", "pf.iterations", "PF variational sweeps"},
    {"--pf-shape", "pf.shape", "PF Gamma prior shape"},
    {"--pf-rate", "pf.rate", "PF Gamma prior rate"},
    {"--groupings", "grouping.list", "';' list: G1[:frac] G2[:item,user]"},
    {"--short-head-fraction", "grouping.short_head_fraction",
     "short-head item fraction"},
    {"--g1-size-rule", "grouping.g1_size_rule",
     "floor | round-half-down | round-half-up | ceil"},
    {"--g2-size-rule", "grouping.g2_size_rule",
     "floor | round-half-down | round-half-up | ceil"},
    {"--k", "rerank.k", "list length K"},
    {"--n", "rerank.n", "candidate pool size N"},
    {"--epsilon", "rerank.epsilon", "bound on |estimated UGF| (inf allowed)"},
    {"--gain-model", "rerank.gain_model",
     "per-user-minmax | global-minmax | calibrated"},
    {"--max-iters", "rerank.max_iters", "bisection iterations"},
    {"--tol", "rerank.tol", "bisection slack tolerance"},
    {"--split", "io.split", "split directory written by prep"},
    {"--candidates", "io.candidates", "candidate score file"},
    {"--fair", "io.fair", "re-ranked score file"},
    {"--grouping", "io.grouping", "grouping file written by group"},
    {"--model-file", "io.model_file", "model file written by train"},
    {"--scores", "io.scores", "external score file (user item score)"},
    {"--records", "io.records", "comma list of record.json files"},
    {"--format", "io.format", "csv | json | markdown"},
    {"--kind", "io.kind", "characteristics | tradeoffs"},
    {"--solver", "io.solver", "lagrangian | brute-force"},
    {"--label", "io.label", "model label for reports"},
    {"--dump-problem", "io.dump_problem", "also write the problem dump here"},
};

const FlagSpec& Flag(std::string_view name) {
  for (const auto& f : kFlags) {
    if (name == f.flag) return f;
  }
  throw Error(ErrorCode::kInternal, "no flag " + std::string(name));
}

struct Globals {
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string config_path;
  std::vector<std::string> sets;
};

class Command {
 public:
  Command(CLI::App& app, const char* name, const char* help,
          std::vector<std::string_view> flags)
      : sub_(app.add_subcommand(name, help)) {
    for (auto f : flags) {
      const FlagSpec& spec = Flag(f);
      if (sub_->get_option_no_throw(spec.flag) != nullptr) continue;
      bindings_.push_back({spec.flag, spec.key, std::string()});
      sub_->add_option(spec.flag, bindings_.back().value,
                       std::string(spec.help) + " [" + spec.key + "]");
    }
  }
  bool parsed() const { return sub_->parsed(); }
  void Apply(Config& config) const {
    for (const auto& b : bindings_) {
      if (sub_->count(b.flag) > 0) config.Set(b.key, b.value);
    }
  }

 private:
  struct Binding {
    std::string flag;
    std::string key;
    std::string value;
  };
  CLI::App* sub_;
  std::list<Binding> bindings_;  // stable addresses for CLI11
};

Config BuildConfig(const Globals& g, const Command& cmd) {
  Config config;
  if (!g.config_path.empty()) config = Config::FromFile(g.config_path);
  for (const auto& s : g.sets) config.SetAssignment(s);
  if (g.seed_set) config.Set("run.seed", std::to_string(g.seed));
  if (!g.out.empty()) config.Set("run.out", g.out);
  cmd.Apply(config);
  return config;
}

std::string Need(const Config& c, const std::string& key) {
  auto v = c.Get(key);
  if (!v || v->empty()) {
    throw Error(ErrorCode::kConfig, "missing required setting " + key);
  }
  return *v;
}

fs::path OutDir(const Config& c) {
  fs::path out = c.GetString("run.out", "fairrank_out");
  fs::create_directories(out);
  return out;
}

DataSplit NeedSplit(const Config& c) {
  const fs::path dir = Need(c, "io.split");
  if (!fs::exists(dir / "train.tsv")) {
    throw Error(ErrorCode::kConfig, "not a split directory: " + dir.string());
  }
  return LoadSplit(dir);
}

CandidateLists ReadCandidates(const fs::path& path, const InteractionSet& train,
                              int n) {
  auto lists = ImportScores(path, train, n);
  lists.provenance = path.stem().string();
  return lists;
}

Grouping NeedGrouping(const Config& c, const InteractionSet& train) {
  return ParseGrouping(ReadFile(Need(c, "io.grouping")), train.users);
}

int RunPrep(const Config& c) {
  const ExperimentConfig e = ConfigToExperiment(c);
  InteractionSet data =
      e.data_path.empty()
          ? GenerateSynthetic(e.synthetic)
          : LoadInteractions(e.data_path, e.schema, e.delimiter);
  const InteractionSet core = KCoreFilter(data, e.k_core);
  const DataSplit split = SplitHoldout(core, e.test_fraction, e.seed);
  const fs::path out = OutDir(c);
  SaveSplit(split, out);
  const DatasetStats s = ComputeStats(core);
  std::cout << "users " << s.n_users << " items " << s.n_items
            << " interactions " << s.n_interactions << " train "
            << split.train.size() << " test " << split.test.size() << "\n";
  return 0;
}

int RunSynth(const Config& c) {
  const ExperimentConfig e = ConfigToExperiment(c);
  const InteractionSet data = GenerateSynthetic(e.synthetic);
  const fs::path out = OutDir(c) / "synthetic.tsv";
  WriteFileAtomic(out, FormatInteractions(data));
  std::cout << out.string() << "\n";
  return 0;
}

int RunTrain(const Config& c) {
  const ExperimentConfig e = ConfigToExperiment(c);
  const DataSplit split = NeedSplit(c);
  if (e.models.size() != 1 || e.models[0].kind == ModelKind::kImport) {
    throw Error(ErrorCode::kConfig, "train needs exactly one in-repo model");
  }
  const ModelSpec& spec = e.models[0];
  FactorModel model;
  TrainTrace trace;
  switch (spec.kind) {
    case ModelKind::kMostPop:
      model = TrainMostPop(split.train);
      break;
    case ModelKind::kBpr:
      model = TrainBpr(split.train, e.bpr, &trace);
      break;
    case ModelKind::kWmf:
      model = TrainWmf(split.train, e.wmf, &trace);
      break;
    case ModelKind::kPf:
      model = TrainPf(split.train, e.pf, &trace);
      break;
    case ModelKind::kImport:
      break;
  }
  const fs::path out = OutDir(c) / (spec.name + ".model");
  SaveModel(model, out);
  if (!trace.values.empty()) {
    std::cout << "trace first " << FormatDouble(trace.values.front())
              << " last " << FormatDouble(trace.values.back()) << "\n";
  }
  std::cout << out.string() << "\n";
  return 0;
}

int RunRank(const Config& c) {
  const ExperimentConfig e = ConfigToExperiment(c);
  const DataSplit split = NeedSplit(c);
  const FactorModel model = LoadModel(Need(c, "io.model_file"));
  const CandidateLists lists = PredictTopN(model, split.train, e.n, e.threads);
  const fs::path out = OutDir(c) / (model.name + "_candidates.tsv");
  WriteFileAtomic(out, FormatScores(lists, split.train));
  std::cout << out.string() << "\n";
  return 0;
}

int RunImport(const Config& c) {
  const ExperimentConfig e = ConfigToExperiment(c);
  const DataSplit split = NeedSplit(c);
  const fs::path scores = Need(c, "io.scores");
  const CandidateLists lists = ImportScores(scores, split.train, e.n);
  const fs::path out = OutDir(c) / (scores.stem().string() + "_candidates.tsv");
  WriteFileAtomic(out, FormatScores(lists, split.train));
  std::cout << out.string() << "\n";
  return 0;
}

int RunGroup(const Config& c) {
  const ExperimentConfig e = ConfigToExperiment(c);
  const DataSplit split = NeedSplit(c);
  const fs::path out = OutDir(c);
  for (const auto& spec : e.groupings) {
    const Grouping g =
        spec.method == GroupingMethod::kActivity
            ? GroupByActivity(split.train, spec.user_fraction, spec.size_rule)
            : GroupByPopularConsumption(split.train, spec.item_fraction,
                                        spec.user_fraction, spec.size_rule);
    WriteFileAtomic(out / (spec.Label() + ".tsv"),
                    FormatGrouping(g, split.train.users));
    std::cout << spec.Label() << " advantaged " << g.advantaged.size()
              << " disadvantaged " << g.disadvantaged.size() << "\n";
  }
  const ItemPartition p =
      SplitItemsShortLong(Popularity(split.train), e.short_head_fraction);
  WriteFileAtomic(out / "items.tsv", FormatItemPartition(p, split.train.items));
  std::cout << "short-head " << p.short_head.size() << " long-tail "
            << p.long_tail.size() << "\n";
  return 0;
}

int RunRerank(const Config& c) {
  const ExperimentConfig e = ConfigToExperiment(c);
  const DataSplit split = NeedSplit(c);
  const CandidateLists cands =
      ReadCandidates(Need(c, "io.candidates"), split.train, e.n);
  const Grouping grouping = NeedGrouping(c, split.train);
  GainCalibration calibration;
  if (e.gain_model == GainModel::kCalibrated) {
    if (e.models.size() != 1) {
      throw Error(ErrorCode::kConfig,
                  "calibrated gains need --model naming the in-repo model "
                  "that produced the candidates");
    }
    calibration = CalibrateGains(e, e.models[0], split.train);
  }
  const RerankProblem problem = BuildProblem(cands, grouping, e.k, e.epsilon,
                                             e.gain_model, &calibration);
  const fs::path out_dir = OutDir(c);
  if (auto dump = c.Get("io.dump_problem"); dump && !dump->empty()) {
    WriteFileAtomic(*dump, FormatProblem(problem));
  }
  const std::string solver = c.GetString("io.solver", "lagrangian");
  if (solver != "lagrangian" && solver != "brute-force") {
    throw Error(ErrorCode::kConfig, "unknown solver '" + solver + "'");
  }
  int exit_code = 0;
  Selection selection;
  try {
    selection = solver == "lagrangian" ? SolveLagrangian(problem, e.solver)
                                       : BruteForceSolve(problem);
  } catch (const InfeasibleEpsilonError& err) {
    std::cerr << "fairrank: " << err.what() << "\n";
    selection = err.best();
    selection.violation = true;
    exit_code = ExitCodeFor(err.code());
  }
  const fs::path out = out_dir / (cands.provenance + "_fair.tsv");
  WriteFileAtomic(out, FormatScores(ApplySelection(selection, problem),
                                    split.train));
  const Selection identity = SolveIdentity(problem);
  std::cout << "solver " << SolverName(selection.solver) << " lambda "
            << (selection.lambda_star ? FormatDouble(*selection.lambda_star)
                                      : std::string("-"))
            << " iterations " << selection.iterations << " violation "
            << (selection.violation ? 1 : 0) << "\n"
            << "est_ugf " << FormatDouble(identity.est_ugf) << " -> "
            << FormatDouble(selection.est_ugf) << "\n"
            << "objective " << FormatDouble(identity.objective) << " -> "
            << FormatDouble(selection.objective) << "\n"
            << out.string() << "\n";
  return exit_code;
}

int RunEval(const Config& c) {
  const ExperimentConfig e = ConfigToExperiment(c);
  const DataSplit split = NeedSplit(c);
  const Grouping grouping = NeedGrouping(c, split.train);
  const PopularityTable pop = Popularity(split.train);
  const ItemPartition partition =
      SplitItemsShortLong(pop, e.short_head_fraction);
  const RelevanceOracle oracle =
      BuildRelevanceOracle(split.test, e.RelevanceThreshold());
  const fs::path org_path = Need(c, "io.candidates");
  const std::string label = c.GetString("io.label", org_path.stem().string());
  EvaluationInput input;
  input.oracle = &oracle;
  input.grouping = &grouping;
  input.partition = &partition;
  input.popularity = &pop;
  input.train = &split.train;
  input.k = e.k;
  std::vector<MetricReport> rows;
  const RecLists org = ReadCandidates(org_path, split.train, e.k).Items();
  input.lists = &org;
  rows.push_back(Evaluate(input, label, Stage::kOrg));
  if (auto fair_path = c.Get("io.fair"); fair_path && !fair_path->empty()) {
    const RecLists fair = ReadCandidates(*fair_path, split.train, e.k).Items();
    input.lists = &fair;
    rows.push_back(Evaluate(input, label, Stage::kFair));
    rows.back().delta_pct = UgfImprovement(rows[0].ugf, rows[1].ugf).percent;
  }
  const std::string csv = FormatReportCsv(rows);
  WriteFileAtomic(OutDir(c) / ("report_" + grouping.Label() + ".csv"), csv);
  std::cout << csv;
  return 0;
}

std::vector<RunRecord> ReadRecords(const Config& c) {
  std::vector<RunRecord> records;
  std::stringstream list(Need(c, "io.records"));
  std::string path;
  while (std::getline(list, path, ',')) {
    if (!path.empty()) records.push_back(RecordFromJson(ReadFile(path)));
  }
  return records;
}

int RunReport(const Config& c) {
  const auto records = ReadRecords(c);
  if (records.size() != 1) {
    throw Error(ErrorCode::kConfig, "report takes exactly one record");
  }
  const ReportFormat format = ParseReportFormat(c.GetString("io.format", "csv"));
  for (const auto& p : EmitReport(records[0], format, OutDir(c))) {
    std::cout << p.string() << "\n";
  }
  return 0;
}

int RunCorrelate(const Config& c) {
  const auto records = ReadRecords(c);
  const std::string kind = c.GetString("io.kind", "characteristics");
  std::vector<CorrelationRow> rows;
  if (kind == "characteristics") {
    rows = CorrelateCharacteristics(records);
  } else if (kind == "tradeoffs") {
    rows = CorrelateTradeoffs(records);
  } else {
    throw Error(ErrorCode::kConfig, "unknown correlation kind '" + kind + "'");
  }
  const std::string csv = FormatCorrelationCsv(rows);
  WriteFileAtomic(OutDir(c) / ("correlation_" + kind + ".csv"), csv);
  std::cout << csv;
  return 0;
}

int RunAll(const Config& c) {
  const ExperimentConfig e = ConfigToExperiment(c);
  const RunRecord record = RunExperiment(e);
  int violations = 0;
  for (const auto& cell : record.cells) {
    violations += cell.diagnostics.violation ? 1 : 0;
  }
  std::cout << FormatMarkdown(record);
  std::cout << "\n" << (e.out_dir / "record.json").string() << "\n";
  if (violations > 0) {
    std::cerr << "fairrank: " << violations
              << " cell(s) could not meet epsilon; see diagnostics.csv\n";
    return ExitCodeFor(ErrorCode::kInfeasibleEpsilon);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairrank: fairness-constrained top-K re-ranking toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed [run.seed]")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--out", g.out, "output directory [run.out]");
  app.add_option("--config", g.config_path, "INI config file");
  app.add_option("--set", g.sets, "override: section.key=value (repeatable)");

  const std::vector<std::string_view> data_flags = {
      "--data", "--schema", "--delimiter", "--name", "--k-core",
      "--test-fraction", "--users", "--items", "--rank", "--density",
      "--popularity-skew"};
  auto with = [](std::vector<std::string_view> a,
                 const std::vector<std::string_view>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  const std::vector<std::string_view> model_flags = {
      "--bpr-dim", "--bpr-epochs", "--bpr-lr", "--bpr-reg", "--wmf-dim",
      "--wmf-iterations", "--wmf-alpha", "--wmf-reg", "--pf-dim",
      "--pf-iterations", "--pf-shape", "--pf-rate", "--threads"};
  const std::vector<std::string_view> group_flags = {
      "--groupings", "--short-head-fraction", "--g1-size-rule",
      "--g2-size-rule"};
  const std::vector<std::string_view> rerank_flags = {
      "--k", "--n", "--epsilon", "--gain-model", "--max-iters", "--tol",
      "--threads"};

  std::vector<std::pair<Command, int (*)(const Config&)>> commands;
  commands.reserve(11);
  commands.emplace_back(
      Command(app, "prep", "load, k-core filter and split a dataset",
              data_flags),
      RunPrep);
  commands.emplace_back(
      Command(app, "synth", "write a synthetic interaction file",
              data_flags),
      RunSynth);
  commands.emplace_back(
      Command(app, "train", "train one base model on a split",
              with(model_flags, {"--split", "--model"})),
      RunTrain);
  commands.emplace_back(
      Command(app, "rank", "top-N candidate lists from a trained model",
              {"--split", "--model-file", "--n", "--threads"}),
      RunRank);
  commands.emplace_back(
      Command(app, "import-scores", "validate external scores into candidates",
              {"--split", "--scores", "--n"}),
      RunImport);
  commands.emplace_back(
      Command(app, "group", "partition users (G1/G2) and items",
              with(group_flags, {"--split"})),
      RunGroup);
  commands.emplace_back(
      Command(app, "rerank", "fairness-constrained top-K selection",
              with(with(rerank_flags, model_flags),
                   {"--split", "--candidates", "--grouping", "--model",
                    "--solver", "--dump-problem", "--test-fraction",
                    "--relevance-threshold", "--schema"})),
      RunRerank);
  commands.emplace_back(
      Command(app, "eval", "Org (and Fair) metric rows",
              {"--split", "--candidates", "--fair", "--grouping", "--k",
               "--label", "--short-head-fraction", "--relevance-threshold",
               "--schema"}),
      RunEval);
  commands.emplace_back(
      Command(app, "report", "render a run record as csv, json or markdown",
              {"--records", "--format"}),
      RunReport);
  commands.emplace_back(
      Command(app, "correlate", "Pearson analyses across run records",
              {"--records", "--kind"}),
      RunCorrelate);
  commands.emplace_back(
      Command(app, "run", "full pipeline from a config",
              with(with(with(data_flags, {"--models", "--relevance-threshold",
                                          "--cache"}),
                        model_flags),
                   with(group_flags, {"--k", "--n", "--epsilon",
                                      "--gain-model", "--max-iters",
                                      "--tol"}))),
      RunAll);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    for (auto& [cmd, fn] : commands) {
      if (cmd.parsed()) return fn(BuildConfig(g, cmd));
    }
  } catch (const Error& e) {
    std::cerr << "fairrank: " << ErrorCodeName(e.code()) << ": " << e.what()
              << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "fairrank: internal: " << e.what() << "\n";
    return 5;
  }
  return 5;
}
