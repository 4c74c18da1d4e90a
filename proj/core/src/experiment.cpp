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

#include "fed3cr/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

#include "fed3cr/checkpoint.hpp"
#include "fed3cr/errors.hpp"

namespace fed3cr {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError(key + ": expected " + expected + ", got '" + value + "'");
}

long long to_integer(const std::string& key, const std::string& value) {
  long long out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value, "an integer");
  return out;
}

int to_int(const std::string& key, const std::string& value) {
  const long long v = to_integer(key, value);
  if (v < INT32_MIN || v > INT32_MAX) bad_value(key, value, "a 32-bit integer");
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value, "a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "true or false");
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_int(key, trim(part)));
  if (out.empty()) bad_value(key, value, "a comma-separated integer list");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::string fmt(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

// Parse a value through an enum parser, re-labelling its error with the key.
template <typename F>
auto parse_named(const std::string& key, const std::string& value, F parse) {
  try {
    return parse(value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define FIELD_INT(KEY, MEMBER)                                                      \
  Field {                                                                           \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_int(KEY, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }          \
  }
#define FIELD_DOUBLE(KEY, MEMBER)                                                      \
  Field {                                                                              \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_double(KEY, v); }, \
        [](const ExperimentConfig& c) { return fmt(c.MEMBER); }                        \
  }
#define FIELD_BOOL(KEY, MEMBER)                                                      \
  Field {                                                                            \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_bool(KEY, v); }, \
        [](const ExperimentConfig& c) { return fmt(c.MEMBER); }                      \
  }
#define FIELD_ENUM(KEY, MEMBER, PARSE)                                               \
  Field {                                                                            \
    KEY,                                                                             \
        [](ExperimentConfig& c, const std::string& v) {                              \
          c.MEMBER = parse_named(KEY, v, [](const std::string& s) { return PARSE(s); }); \
        },                                                                           \
        [](const ExperimentConfig& c) { return to_string(c.MEMBER); }                \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = [] {
    std::vector<Field> f{
        FIELD_ENUM("dataset.source", dataset.source, parse_data_source),
        Field{"dataset.path",
              [](ExperimentConfig& c, const std::string& v) { c.dataset.path = v; },
              [](const ExperimentConfig& c) { return c.dataset.path; }},
        FIELD_ENUM("dataset.format", dataset.format, parse_data_format),
        FIELD_INT("dataset.min_interactions", dataset.min_interactions),
        FIELD_ENUM("dataset.holdout", dataset.holdout, parse_holdout_rule),
        FIELD_INT("dataset.toy_clients", dataset.toy.clients),
        FIELD_INT("dataset.toy_items", dataset.toy.items),
        FIELD_INT("dataset.toy_blocks", dataset.toy.blocks),
        FIELD_INT("dataset.toy_positives", dataset.toy.positives_per_client),
        FIELD_DOUBLE("dataset.toy_in_block_fraction", dataset.toy.in_block_fraction),
        FIELD_DOUBLE("dataset.toy_popularity_skew", dataset.toy.popularity_skew),
        Field{"dataset.toy_seed",
              [](ExperimentConfig& c, const std::string& v) {
                c.dataset.toy.seed = to_u64("dataset.toy_seed", v);
              },
              [](const ExperimentConfig& c) { return std::to_string(c.dataset.toy.seed); }},

        FIELD_INT("training.rounds", training.rounds),
        FIELD_INT("training.local_iterations", training.local_iterations),
        FIELD_INT("training.dim", training.dim),
        FIELD_INT("training.batch_size", training.batch_size),
        FIELD_INT("training.negatives_per_positive", training.negatives_per_positive),
        FIELD_DOUBLE("training.client_fraction", training.client_fraction),
        FIELD_DOUBLE("training.lr", training.lr),
        FIELD_DOUBLE("training.lr_gamma", training.lr_gamma),
        FIELD_DOUBLE("training.beta_a", training.beta_a),
        FIELD_DOUBLE("training.beta_o", training.beta_o),
        FIELD_ENUM("training.ace_init", training.ace_init, parse_ace_init),
        FIELD_DOUBLE("training.ace_scale", training.ace_scale),
        FIELD_ENUM("training.top_one_mode", training.top_one_mode, parse_top_one_mode),
        FIELD_BOOL("training.consistency_sample", training.consistency_sample),
        FIELD_INT("training.eval_negatives", training.eval_negatives),
        Field{"training.layers",
              [](ExperimentConfig& c, const std::string& v) {
                c.training.layers = to_int_list("training.layers", v);
              },
              [](const ExperimentConfig& c) { return fmt(c.training.layers); }},
        FIELD_ENUM("training.precision", training.precision, parse_precision),
        Field{"training.seed",
              [](ExperimentConfig& c, const std::string& v) {
                c.training.seed = to_u64("training.seed", v);
              },
              [](const ExperimentConfig& c) { return std::to_string(c.training.seed); }},
    };

    // Variant getters report the resolved configuration.
    f.push_back({"variant.label",
                 [](ExperimentConfig& c, const std::string& v) { c.variant.label = v; },
                 [](const ExperimentConfig& c) { return c.variant.label; }});
    f.push_back({"variant.ace",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.variant.ace = to_bool("variant.ace", v);
                 },
                 [](const ExperimentConfig& c) { return fmt(c.variant.resolve().ace_enabled); }});
    f.push_back({"variant.consistency",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.variant.consistency = to_bool("variant.consistency", v);
                 },
                 [](const ExperimentConfig& c) {
                   return fmt(c.variant.resolve().consistency_enabled);
                 }});
    f.push_back({"variant.orthogonality",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.variant.orthogonality = to_bool("variant.orthogonality", v);
                 },
                 [](const ExperimentConfig& c) {
                   return fmt(c.variant.resolve().orthogonality_enabled);
                 }});
    f.push_back({"variant.enhancement",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.variant.enhancement = parse_named("variant.enhancement", v,
                                                       [](const std::string& s) {
                                                         return parse_enhancement_kind(s);
                                                       });
                 },
                 [](const ExperimentConfig& c) {
                   return to_string(c.variant.resolve().enhancement_kind);
                 }});
    f.push_back({"variant.complementarity",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.variant.complementarity = parse_named(
                       "variant.complementarity", v,
                       [](const std::string& s) { return parse_complementarity_kind(s); });
                 },
                 [](const ExperimentConfig& c) {
                   return to_string(c.variant.resolve().complementarity_kind);
                 }});
    f.push_back({"variant.base",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.variant.base = parse_named("variant.base", v, [](const std::string& s) {
                     return parse_base_model(s);
                   });
                 },
                 [](const ExperimentConfig& c) { return to_string(c.variant.resolve().base_model); }});

    f.push_back(FIELD_INT("eval.interval", eval.interval));
    f.push_back(FIELD_INT("eval.k", eval.k));
    f.push_back(FIELD_INT("eval.k_prime", eval.k_prime));
    f.push_back(FIELD_DOUBLE("eval.rbo_p", eval.rbo_p));
    f.push_back(FIELD_BOOL("eval.rbo", eval.rbo));
    f.push_back(FIELD_BOOL("eval.full_ranking", eval.full_ranking));
    f.push_back(FIELD_BOOL("eval.hold_out_candidates", eval.hold_out_candidates));

    f.push_back({"output.dir",
                 [](ExperimentConfig& c, const std::string& v) { c.output.dir = v; },
                 [](const ExperimentConfig& c) { return c.output.dir; }});
    f.push_back(FIELD_BOOL("output.checkpoints", output.checkpoints));
    return f;
  }();
  return kFields;
}

#undef FIELD_INT
#undef FIELD_DOUBLE
#undef FIELD_BOOL
#undef FIELD_ENUM

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

const std::vector<std::string> kSections{"dataset", "training", "variant", "eval", "output"};

std::string manifest_value_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return fmt(v.get<bool>());
  if (v.is_number_integer()) return v.dump();
  if (v.is_number_float()) return fmt(v.get<double>());
  throw ConfigError("manifest config values must be scalars, got " + v.dump());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeFailure("failed writing " + path.string());
}

// Refuses a non-empty directory unless force is set.
void prepare_output_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !force) {
    throw ConfigError("output.dir: '" + dir.string() +
                      "' already holds results; pass --force to overwrite");
  }
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create " + dir.string() + ": " + ec.message());
}

void update_best(ExperimentRecord& r) {
  r.best_hr = r.best_ndcg = 0.0;
  r.best_hr_round = r.best_ndcg_round = 0;
  for (const auto& m : r.metrics) {
    if (r.best_hr_round == 0 || m.hr_at_k > r.best_hr) {
      r.best_hr = m.hr_at_k;
      r.best_hr_round = m.round;
    }
    if (r.best_ndcg_round == 0 || m.ndcg_at_k > r.best_ndcg) {
      r.best_ndcg = m.ndcg_at_k;
      r.best_ndcg_round = m.round;
    }
  }
}

template <typename T>
void write_checkpoints(const std::filesystem::path& dir, const TrainingResult<T>& result,
                       std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  CheckpointMeta meta;
  meta.seed = seed;
  meta.round = result.server.round;
  ClientUpload<T> server{result.server.consensus, result.server.net};
  write_bytes(dir / "server.ckpt", encode_upload(server, meta));
  for (const auto& c : result.clients) {
    meta.client_id = c.client_id;
    write_bytes(dir / ("client_" + std::to_string(c.client_id) + ".ckpt"),
                encode_client_state(c, meta));
  }
}

template <typename T>
void train_into(ExperimentRecord& record, const ExperimentConfig& config,
                const InteractionDataset& ds, const VariantConfig& variant,
                TrainingOptions topts, const RunOptions& options,
                const std::filesystem::path& dir) {
  const TrainingResult<T> result = run_training<T>(ds, config.training, variant, topts);
  record.warnings.insert(record.warnings.end(), result.warnings.begin(), result.warnings.end());
  if (options.write_outputs && config.output.checkpoints) {
    write_checkpoints(dir / "checkpoints", result, config.training.seed);
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

DataSource parse_data_source(const std::string& name) {
  if (name == "toy") return DataSource::kToy;
  if (name == "file") return DataSource::kFile;
  throw ConfigError("unknown data source '" + name + "' (expected toy or file)");
}

std::string to_string(DataSource s) { return s == DataSource::kToy ? "toy" : "file"; }

HoldoutRule parse_holdout_rule(const std::string& name) {
  if (name == "latest-timestamp") return HoldoutRule::kLatestTimestamp;
  if (name == "random") return HoldoutRule::kRandom;
  throw ConfigError("unknown holdout rule '" + name + "' (expected latest-timestamp or random)");
}

std::string to_string(HoldoutRule r) {
  return r == HoldoutRule::kLatestTimestamp ? "latest-timestamp" : "random";
}

VariantConfig VariantSettings::resolve() const {
  VariantConfig v;
  if (label == "FedMF") {
    v = VariantConfig::fedmf(false);
  } else if (label == "FedMF+ACE") {
    v = VariantConfig::fedmf(true);
  } else if (label == "consensus-transfer") {
    v = VariantConfig::enhancement_baseline(EnhancementKind::kConsensusTransfer);
  } else if (label == "unified-transfer") {
    v = VariantConfig::enhancement_baseline(EnhancementKind::kUnifiedTransfer);
  } else {
    try {
      v = VariantConfig::from_label(label);
    } catch (const ConfigError&) {
      throw ConfigError("variant.label: unknown label '" + label +
                        "' (expected C0..C6, Fed3CR, FedMF, FedMF+ACE, consensus-transfer or "
                        "unified-transfer)");
    }
  }
  if (enhancement) {
    v.enhancement_kind = *enhancement;
    v.ace_enabled = *enhancement == EnhancementKind::kAce;
  }
  if (ace) {
    v.ace_enabled = *ace;
    if (!enhancement) {
      if (*ace) {
        v.enhancement_kind = EnhancementKind::kAce;
      } else if (v.enhancement_kind == EnhancementKind::kAce) {
        v.enhancement_kind = EnhancementKind::kNone;
      }
    }
  }
  if (consistency) v.consistency_enabled = *consistency;
  if (orthogonality) v.orthogonality_enabled = *orthogonality;
  if (complementarity) v.complementarity_kind = *complementarity;
  if (base) v.base_model = *base;
  return v;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, trim(value));
}

std::string ExperimentConfig::get(const std::string& key) const { return field(key).get(*this); }

std::vector<std::pair<std::string, std::string>> ExperimentConfig::settings() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

void ExperimentConfig::validate() const {
  if (dataset.source == DataSource::kFile && dataset.path.empty()) {
    throw ConfigError("dataset.path: required when dataset.source = file");
  }
  if (dataset.min_interactions < 1) throw ConfigError("dataset.min_interactions: must be >= 1");
  if (dataset.source == DataSource::kToy) {
    try {
      dataset.toy.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("dataset.") + e.what());
    }
  }
  training.validate();
  variant.resolve().validate();
  if (eval.interval < 1) throw ConfigError("eval.interval: must be >= 1");
  if (eval.k < 1) throw ConfigError("eval.k: must be >= 1");
  if (eval.k_prime < 1) throw ConfigError("eval.k_prime: must be >= 1");
  if (!(eval.rbo_p > 0.0 && eval.rbo_p < 1.0)) throw ConfigError("eval.rbo_p: must lie in (0, 1)");
  if (output.dir.empty()) throw ConfigError("output.dir: must not be empty");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> kKeys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return kKeys;
}

ExperimentConfig parse_config(std::string_view text, const std::string& origin) {
  ExperimentConfig config;
  std::string section;
  std::vector<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  auto where = [&] { return origin + ":" + std::to_string(line) + ": "; };
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where() + "malformed section header '" + s + "'");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw ConfigError(where() + "unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where() + "expected 'key = value', got '" + s + "'");
    std::string key = trim(std::string_view(s).substr(0, eq));
    if (key.empty()) throw ConfigError(where() + "empty key");
    if (!section.empty()) key = section + "." + key;
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw ConfigError(where() + "duplicate key '" + key + "'");
    }
    seen.push_back(key);
    try {
      config.set(key, trim(std::string_view(s).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || text[first] != '{') {
    return parse_config(text, path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  const nlohmann::json& cfg = j.contains("config") ? j.at("config") : j;
  if (!cfg.is_object()) throw ConfigError(path.string() + ": 'config' must be an object");
  ExperimentConfig config;
  for (const auto& [key, value] : cfg.items()) config.set(key, manifest_value_string(value));
  return config;
}

std::string config_text(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& [key, value] : config.settings()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

void apply_environment(ExperimentConfig& config) {
  if (const char* seed = std::getenv("FED3CR_SEED"); seed != nullptr && *seed != '\0') {
    config.training.seed = to_u64("FED3CR_SEED", seed);
  }
}

std::vector<int> layer_schedule(int layers) {
  if (layers < 1 || layers > 16) throw ConfigError("layers: must lie in [1, 16]");
  std::vector<int> out;
  for (int l = 1; l <= layers; ++l) out.push_back(1 << l);
  return out;
}

InteractionDataset load_experiment_dataset(const DatasetConfig& dataset, std::uint64_t seed) {
  if (dataset.source == DataSource::kToy) {
    return leave_one_out_split(
        build_dataset(generate_toy_records(dataset.toy), dataset.min_interactions), seed,
        dataset.holdout);
  }
  return leave_one_out_split(load_dataset(dataset.path, dataset.format, dataset.min_interactions),
                             seed, dataset.holdout);
}

const RoundMetrics& ExperimentRecord::final_metrics() const {
  if (metrics.empty()) throw RuntimeFailure("experiment produced no metrics");
  return metrics.back();
}

#ifndef FED3CR_VERSION_STRING
#define FED3CR_VERSION_STRING "unknown"
#endif

const char* version_string() { return FED3CR_VERSION_STRING; }

std::string ExperimentRecord::manifest_json() const {
  nlohmann::ordered_json j;
  j["status"] = ok ? "ok" : "failed";
  j["version"] = version_string();
  if (!ok) j["error"] = error;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json summary;
  summary["rounds_completed"] = round_seconds.size();
  summary["best_hr"] = best_hr;
  summary["best_hr_round"] = best_hr_round;
  summary["best_ndcg"] = best_ndcg;
  summary["best_ndcg_round"] = best_ndcg_round;
  if (!metrics.empty()) {
    summary["final_hr"] = metrics.back().hr_at_k;
    summary["final_ndcg"] = metrics.back().ndcg_at_k;
    if (metrics.back().has_rbo) summary["final_rbo"] = metrics.back().rbo;
  }
  j["summary"] = summary;
  j["round_seconds"] = round_seconds;
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

ExperimentRecord run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const InteractionDataset ds = load_experiment_dataset(config.dataset, config.training.seed);
  return run_experiment(config, ds, options);
}

ExperimentRecord run_experiment(const ExperimentConfig& config, const InteractionDataset& ds,
                                const RunOptions& options) {
  config.validate();
  const VariantConfig variant = config.variant.resolve();
  const std::filesystem::path dir(config.output.dir);
  if (options.write_outputs) prepare_output_dir(dir, options.force);

  ExperimentRecord record;
  record.config = config.settings();
  record.variant = variant;

  std::ofstream csv;
  if (options.write_outputs) {
    csv.open(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw RuntimeFailure("cannot write " + (dir / "metrics.csv").string());
    csv << metrics_csv_header() << '\n' << std::flush;
  }

  TrainingOptions topts;
  topts.workers = options.workers;
  topts.eval = config.eval;
  topts.upload_observer = options.upload_observer;
  topts.on_round_end = [&](int, double seconds) { record.round_seconds.push_back(seconds); };
  topts.on_metrics = [&](const RoundMetrics& m) {
    record.metrics.push_back(m);
    if (csv.is_open()) csv << metrics_csv_row(m) << '\n' << std::flush;
  };

  try {
    if (config.training.precision == Precision::kF64) {
      train_into<double>(record, config, ds, variant, topts, options, dir);
    } else {
      train_into<float>(record, config, ds, variant, topts, options, dir);
    }
  } catch (const std::exception& e) {
    record.ok = false;
    record.error = e.what();
    update_best(record);
    if (options.write_outputs) {
      csv.close();
      write_text(dir / "manifest.json", record.manifest_json());
    }
    throw;
  }
  update_best(record);
  if (options.write_outputs) {
    csv.close();
    write_text(dir / "manifest.json", record.manifest_json());
  }
  return record;
}

std::vector<ComparisonRow> ablate(const ExperimentConfig& base,
                                  const std::vector<std::string>& labels,
                                  const RunOptions& options) {
  if (labels.empty()) throw ConfigError("ablate: no variants given");
  base.validate();
  for (const auto& label : labels) {
    ExperimentConfig c = base;
    c.variant = VariantSettings{};
    c.variant.label = label;
    c.validate();
  }
  const std::filesystem::path dir(base.output.dir);
  if (options.write_outputs) prepare_output_dir(dir, options.force);
  const InteractionDataset ds = load_experiment_dataset(base.dataset, base.training.seed);

  std::vector<ComparisonRow> rows;
  for (const auto& label : labels) {
    ExperimentConfig c = base;
    c.variant = VariantSettings{};
    c.variant.label = label;
    c.output.dir = (dir / label).string();
    RunOptions sub = options;
    sub.force = true;
    const ExperimentRecord r = run_experiment(c, ds, sub);
    const auto& m = r.final_metrics();
    rows.push_back({label, r.variant, m.round, m.hr_at_k, m.ndcg_at_k});
  }
  if (options.write_outputs) write_text(dir / "ablation.csv", ablation_csv(rows, base.eval.k));
  return rows;
}

std::vector<ComparisonRow> sweep(const ExperimentConfig& base, const std::string& param,
                                 const std::vector<std::string>& values,
                                 const RunOptions& options) {
  if (param != "beta_a" && param != "beta_o" && param != "layers") {
    throw ConfigError("sweep: unknown parameter '" + param + "' (expected beta_a, beta_o or layers)");
  }
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<ExperimentConfig> configs;
  const std::filesystem::path dir(base.output.dir);
  for (const auto& value : values) {
    ExperimentConfig c = base;
    if (param == "layers") {
      c.training.layers = layer_schedule(to_int("sweep.layers", value));
    } else {
      c.set("training." + param, value);
    }
    c.output.dir = (dir / (param + "=" + value)).string();
    c.validate();
    configs.push_back(std::move(c));
  }
  if (options.write_outputs) prepare_output_dir(dir, options.force);
  const InteractionDataset ds = load_experiment_dataset(base.dataset, base.training.seed);

  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    RunOptions sub = options;
    sub.force = true;
    const ExperimentRecord r = run_experiment(configs[i], ds, sub);
    const auto& m = r.final_metrics();
    rows.push_back({values[i], r.variant, m.round, m.hr_at_k, m.ndcg_at_k});
  }
  if (options.write_outputs) write_text(dir / "sweep.csv", sweep_csv(param, rows, base.eval.k));
  return rows;
}

std::string ablation_csv(const std::vector<ComparisonRow>& rows, int k) {
  const std::string ks = std::to_string(k);
  std::string out = "variant,ace,consistency,orthogonality,round,hr" + ks + ",ndcg" + ks + "\n";
  for (const auto& r : rows) {
    out += csv_field(r.name) + "," + fmt(r.variant.ace_enabled) + "," +
           fmt(r.variant.consistency_enabled) + "," + fmt(r.variant.orthogonality_enabled) + "," +
           std::to_string(r.round) + "," + fixed6(r.hr) + "," + fixed6(r.ndcg) + "\n";
  }
  return out;
}

std::string sweep_csv(const std::string& param, const std::vector<ComparisonRow>& rows, int k) {
  const std::string ks = std::to_string(k);
  std::string out = param + ",round,hr" + ks + ",ndcg" + ks + "\n";
  for (const auto& r : rows) {
    out += csv_field(r.name) + "," + std::to_string(r.round) + "," + fixed6(r.hr) + "," +
           fixed6(r.ndcg) + "\n";
  }
  return out;
}

}  // namespace fed3cr
