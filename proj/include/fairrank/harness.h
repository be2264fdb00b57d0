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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairrank/config.h"
#include "fairrank/grouping.h"
#include "fairrank/ingest.h"
#include "fairrank/metrics.h"
#include "fairrank/rankers.h"
#include "fairrank/ufr.h"

namespace fairrank {

enum class ModelKind { kMostPop, kBpr, kWmf, kPf, kImport };

struct ModelSpec {
  ModelKind kind = ModelKind::kMostPop;
  std::string name;                   // report label
  std::filesystem::path import_path;  // kImport only
};

// "mostpop", "bpr", "wmf", "pf", or "import:<path>[:<label>]".
ModelSpec ParseModelSpec(std::string_view text);

struct GroupingSpec {
  GroupingMethod method = GroupingMethod::kActivity;
  double user_fraction = 0.05;
  double item_fraction = 0.2;  // G2 only
  SizeRule size_rule = SizeRule::kRoundHalfDown;
  std::string Label() const;
};

// "G1:<user_frac>" or "G2:<item_frac>,<user_frac>"; bare "G1"/"G2" use
// 0.05 and 0.2,0.2.
GroupingSpec ParseGroupingSpec(std::string_view text);

struct ExperimentConfig {
  // Input: a ratings file, or the synthetic generator when `data_path` is
  // empty.
  std::filesystem::path data_path;
  FeedbackSchema schema = FeedbackSchema::kImplicit;
  char delimiter = '\t';
  std::string dataset_name = "synthetic";
  SyntheticParams synthetic;

  int k_core = 5;
  double test_fraction = 0.2;
  uint64_t seed = 0;
  // Unset: 4 for explicit feedback, presence for implicit.
  std::optional<double> relevance_threshold;

  std::vector<ModelSpec> models;
  BprOptions bpr;
  WmfOptions wmf;
  PfOptions pf;

  std::vector<GroupingSpec> groupings;
  double short_head_fraction = 0.2;

  int k = 10;
  int n = 100;
  double epsilon = 0.005;
  GainModel gain_model = GainModel::kCalibrated;
  LagrangianOptions solver;

  std::filesystem::path out_dir = "fairrank_out";
  int threads = 1;
  bool cache = true;

  double RelevanceThreshold() const;
  // Throws kConfig on invalid settings or unreadable input paths.
  void Validate() const;
  // Canonical "key = value" listing of every result-affecting setting.
  std::string Canonical() const;
  std::string DigestHex() const;
};

// Every key understood by ConfigToExperiment, for documentation and typo
// detection.
const std::vector<std::string>& KnownConfigKeys();
ExperimentConfig ConfigToExperiment(const Config& config);

struct DatasetStats {
  int n_users = 0;
  int n_items = 0;
  int64_t n_interactions = 0;
  double per_user = 0.0;  // |P| / |U|
  double per_item = 0.0;  // |P| / |I|
  double sparsity = 0.0;
  bool operator==(const DatasetStats&) const = default;
};

DatasetStats ComputeStats(const InteractionSet& data);

struct SolverDiagnostics {
  std::string solver;
  std::optional<double> lambda_star;
  int iterations = 0;
  bool violation = false;
  double est_ugf_org = 0.0;
  double est_ugf_fair = 0.0;
  double objective_org = 0.0;
  double objective_fair = 0.0;
  bool delta_defined = true;  // Org UGF nonzero
  bool operator==(const SolverDiagnostics&) const = default;
};

struct CellRecord {
  std::string model;
  std::string grouping;  // "G1" / "G2"
  MetricReport org;
  MetricReport fair;
  SolverDiagnostics diagnostics;
  bool operator==(const CellRecord&) const = default;
};

struct RunRecord {
  std::string config_digest;
  std::string dataset;
  double epsilon = 0.0;
  int k = 10;
  DatasetStats stats;  // after k-core filtering
  std::vector<CellRecord> cells;
  std::vector<std::string> Groupings() const;
  bool operator==(const RunRecord&) const = default;
};

// Full pipeline. Writes split, candidates, groupings, selections and
// reports under config.out_dir; reuses cached stages whose input digest
// matches. Stage failures are rethrown with the stage name and digest.
RunRecord RunExperiment(const ExperimentConfig& config);

// Calibration for GainModel::kCalibrated: refits `model` on a holdout
// carved out of `train` (same fraction, seed mixed from config.seed) and
// measures its per-rank hit rates. Throws kConfig for imported scores.
GainCalibration CalibrateGains(const ExperimentConfig& config,
                               const ModelSpec& model,
                               const InteractionSet& train);

struct CorrelationRow {
  std::string grouping;
  std::string x;
  std::string y;
  int n = 0;
  std::optional<Correlation> value;  // empty: undefined (zero variance)
  std::string note;
};

// Pearson of the per-dataset mean UGF improvement against |P|/|U| and
// |P|/|I|, per grouping. Needs at least 3 records.
std::vector<CorrelationRow> CorrelateCharacteristics(
    const std::vector<RunRecord>& records);

// Per grouping, over all cells: UGF improvement against the relative change
// of NDCG, novelty, and |dGAP| (adv and dis).
std::vector<CorrelationRow> CorrelateTradeoffs(
    const std::vector<RunRecord>& records);

std::string FormatCorrelationCsv(const std::vector<CorrelationRow>& rows);

// Relative change in percent; nullopt when `org` is 0.
std::optional<double> RelativeChangePct(double org, double fair);
// Reduction of |value| in percent; nullopt when `org` is 0.
std::optional<double> MagnitudeReductionPct(double org, double fair);

enum class ReportFormat { kCsv, kJson, kMarkdown };
ReportFormat ParseReportFormat(std::string_view name);

// Org/Fair rows of one grouping.
std::vector<MetricReport> ReportRows(const RunRecord& record,
                                     std::string_view grouping);
std::string FormatDiagnosticsCsv(const RunRecord& record);
std::string FormatMarkdown(const RunRecord& record);
std::string RecordToJson(const RunRecord& record);
RunRecord RecordFromJson(std::string_view text);

// Writes the report files for `format` into `dir` and returns their paths.
std::vector<std::filesystem::path> EmitReport(const RunRecord& record,
                                              ReportFormat format,
                                              const std::filesystem::path& dir);

}  // namespace fairrank
