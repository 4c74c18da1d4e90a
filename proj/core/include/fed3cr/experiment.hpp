// Copyright 2026 The Fed3CR Authors.
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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fed3cr/datasets.hpp"
#include "fed3cr/evaluation.hpp"
#include "fed3cr/federation.hpp"
#include "fed3cr/toy.hpp"

namespace fed3cr {

enum class DataSource { kToy, kFile };

DataSource parse_data_source(const std::string& name);
std::string to_string(DataSource s);
HoldoutRule parse_holdout_rule(const std::string& name);
std::string to_string(HoldoutRule r);

struct DatasetConfig {
  DataSource source = DataSource::kToy;
  std::string path;  // relative paths resolve against the working directory
  DataFormat format = DataFormat::kTsv;
  int min_interactions = 10;
  HoldoutRule holdout = HoldoutRule::kLatestTimestamp;
  ToyDatasetSpec toy;
};

// A preset label plus optional per-flag overrides, applied after the preset.
struct VariantSettings {
  std::string label = "Fed3CR";
  std::optional<bool> ace;
  std::optional<bool> consistency;
  std::optional<bool> orthogonality;
  std::optional<EnhancementKind> enhancement;
  std::optional<ComplementarityKind> complementarity;
  std::optional<BaseModel> base;

  // Labels: C0..C6, Fed3CR, FedMF, FedMF+ACE, consensus-transfer,
  // unified-transfer.
  VariantConfig resolve() const;
};

struct OutputConfig {
  std::string dir = "runs/fed3cr";
  bool checkpoints = true;
};

// Flat sections dataset / training / variant / eval / output. Every field has
// a dotted key such as `training.lr`.
struct ExperimentConfig {
  DatasetConfig dataset;
  HyperParams training;
  VariantSettings variant;
  EvalOptions eval;
  OutputConfig output;

  // Throws ConfigError naming the key on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  // Every key with its resolved value, in canonical order. Variant flags are
  // the resolved ones, so the snapshot is complete.
  std::vector<std::pair<std::string, std::string>> settings() const;

  void validate() const;
};

// Every accepted key, in canonical order.
const std::vector<std::string>& config_keys();

// Sectioned key-value text: `[section]` headers, `key = value` lines, `#` or
// `;` comments. Throws ConfigError with the line number.
ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<config>");

// Sectioned text, or a manifest JSON written by run_experiment (detected by a
// leading `{`).
ExperimentConfig load_config(const std::filesystem::path& path);

std::string config_text(const ExperimentConfig& config);

// FED3CR_SEED, when set, replaces training.seed.
void apply_environment(ExperimentConfig& config);

// Widths {2, 4, ..., 2^n} in units of d for an n-layer transfer net.
std::vector<int> layer_schedule(int layers);

InteractionDataset load_experiment_dataset(const DatasetConfig& dataset, std::uint64_t seed);

// Release plus `git describe` of the source tree at configure time.
const char* version_string();

struct ExperimentRecord {
  std::vector<std::pair<std::string, std::string>> config;
  VariantConfig variant;
  std::vector<RoundMetrics> metrics;
  std::vector<double> round_seconds;
  std::vector<std::string> warnings;
  double best_hr = 0.0;
  int best_hr_round = 0;
  double best_ndcg = 0.0;
  int best_ndcg_round = 0;
  bool ok = true;
  std::string error;

  const RoundMetrics& final_metrics() const;
  std::string manifest_json() const;
};

struct RunOptions {
  int workers = 1;
  bool force = false;         // overwrite an existing output directory
  bool write_outputs = true;  // false keeps everything in memory
  UploadObserver upload_observer;
};

// Loads and splits the dataset, trains, and writes manifest.json,
// metrics.csv and checkpoints/ under output.dir. On a training failure the
// rows so far and a failed manifest are flushed before rethrowing.
ExperimentRecord run_experiment(const ExperimentConfig& config, const RunOptions& options);
ExperimentRecord run_experiment(const ExperimentConfig& config, const InteractionDataset& ds,
                                const RunOptions& options);

struct ComparisonRow {
  std::string name;  // variant label or swept value
  VariantConfig variant;
  int round = 0;
  double hr = 0.0;
  double ndcg = 0.0;
};

// One run per label on a shared split, each under output.dir/<label>.
// Writes output.dir/ablation.csv.
std::vector<ComparisonRow> ablate(const ExperimentConfig& base,
                                  const std::vector<std::string>& labels,
                                  const RunOptions& options);

// param is beta_a, beta_o or layers. One run per value, each under
// output.dir/<param>=<value>. Writes output.dir/sweep.csv.
std::vector<ComparisonRow> sweep(const ExperimentConfig& base, const std::string& param,
                                 const std::vector<std::string>& values,
                                 const RunOptions& options);

std::string ablation_csv(const std::vector<ComparisonRow>& rows, int k);
std::string sweep_csv(const std::string& param, const std::vector<ComparisonRow>& rows, int k);

}  // namespace fed3cr
