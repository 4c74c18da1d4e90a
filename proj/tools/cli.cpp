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

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fed3cr/degradation.hpp"
#include "fed3cr/errors.hpp"
#include "fed3cr/experiment.hpp"

namespace fed3cr::cli {
namespace {

// Config file, environment and dotted overrides shared by training commands.
struct ConfigArgs {
  std::string path;
  std::map<std::string, std::string> dotted;
  std::vector<std::string> sets;
  int workers = 1;
  bool force = false;

  void attach(CLI::App* app, bool outputs) {
    app->add_option("-c,--config", path, "Config file (sectioned text or manifest JSON)");
    app->add_option("--set", sets, "Override as key=value (repeatable)");
    app->add_option("-w,--workers", workers, "Parallel clients")->check(CLI::PositiveNumber);
    if (outputs) app->add_flag("-f,--force", force, "Overwrite an existing output directory");
    for (const auto& key : config_keys()) {
      app->add_option_function<std::string>(
             "--" + key, [this, key](const std::string& v) { dotted[key] = v; },
             "Override " + key)
          ->group("Config overrides");
    }
  }

  // File < FED3CR_SEED < --set < dotted flags.
  ExperimentConfig resolve() const {
    ExperimentConfig config = path.empty() ? ExperimentConfig{} : load_config(path);
    apply_environment(config);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set: expected key=value, got '" + s + "'");
      config.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : dotted) config.set(k, v);
    config.validate();
    return config;
  }

  RunOptions options() const {
    RunOptions o;
    o.workers = workers;
    o.force = force;
    return o;
  }
};

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) {
    const auto b = part.find_first_not_of(" \t");
    const auto e = part.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(part.substr(b, e - b + 1));
  }
  return out;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RuntimeFailure("cannot write " + path);
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(what + ": expected a number, got '" + s + "'");
}

// "x,y;x,y;..." as vectors.
std::vector<Vector> parse_vectors(const std::string& text) {
  std::vector<Vector> out;
  for (const auto& row : split_list(text, ';')) {
    const auto parts = split_list(row, ',');
    Vector v(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) v[i] = parse_number(parts[i], "--vectors");
    out.push_back(std::move(v));
  }
  return out;
}

// One optimum per CSV line, all of one width, as 1 x width matrices.
std::vector<QuadraticClient> read_optima(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open optima file " + path);
  std::vector<QuadraticClient> out;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto parts = split_list(line, ',');
    QuadraticClient c;
    c.optimum = Matrix(1, parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      try {
        c.optimum(0, i) = std::stod(parts[i]);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(n) + ": bad number '" + parts[i] + "'", n);
      }
    }
    if (!out.empty() && out.front().optimum.cols() != c.optimum.cols()) {
      throw ParseError(path + ":" + std::to_string(n) + ": optima differ in width", n);
    }
    out.push_back(std::move(c));
  }
  return out;
}

template <typename T>
std::string probe_json(const ExperimentConfig& config, const InteractionDataset& ds, int workers,
                       const std::string& delta_csv) {
  TrainingOptions topts;
  topts.workers = workers;
  topts.eval = config.eval;
  const VariantConfig variant = config.variant.resolve();
  const auto result = run_training<T>(ds, config.training, variant, topts);
  const ModelSpec spec = make_model_spec(config.training, variant, ds.num_items());
  const auto probe = empirical_heterogeneity_probe(
      result.clients, result.server.consensus, ds, spec, config.training.negatives_per_positive,
      config.training.seed, workers);

  auto j = nlohmann::ordered_json::parse(probe.to_json());
  if (config.dataset.source == DataSource::kToy) {
    // Planted blocks: compare heterogeneity within and across user blocks.
    const std::size_t n = probe.client_ids.size();
    std::vector<int> block(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int ext = std::stoi(ds.external_user(probe.client_ids[i]).substr(1));
      block[i] = toy_user_block(config.dataset.toy, ext);
    }
    double within = 0.0, across = 0.0;
    long nw = 0, na = 0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (block[a] == block[b]) {
          within += probe.delta_difference(a, b);
          ++nw;
        } else {
          across += probe.delta_difference(a, b);
          ++na;
        }
      }
    }
    j["within_block_mean"] = nw > 0 ? within / nw : 0.0;
    j["across_block_mean"] = na > 0 ? across / na : 0.0;
  }
  if (!delta_csv.empty()) {
    std::ofstream f(delta_csv, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeFailure("cannot write " + delta_csv);
    write_matrix_csv(probe.delta_difference, f);
  }
  return j.dump(2);
}

int report_error(std::ostream& err, int code, const std::string& kind, const std::string& what) {
  err << "fed3cr: " << kind << ": " << what << '\n';
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated recommendation with consensus enhancement and C2O regularization",
               "fed3cr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fed3cr 0.1.0");

  // run
  ConfigArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Train one variant and write its outputs");
  run_args.attach(run_cmd, true);

  // ablate
  ConfigArgs ablate_args;
  std::string variants = "C0,C1,C2,C3,C4,C5,C6,Fed3CR";
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare variants on a shared split");
  ablate_args.attach(ablate_cmd, true);
  ablate_cmd->add_option("--variants", variants, "Comma-separated variant labels")
      ->capture_default_str();

  // sweep
  ConfigArgs sweep_args;
  std::string param;
  std::string values;
  auto* sweep_cmd = app.add_subcommand("sweep", "One run per value of a hyperparameter");
  sweep_args.attach(sweep_cmd, true);
  sweep_cmd->add_option("--param", param, "beta_a, beta_o or layers")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();

  // dataset
  auto* dataset_cmd = app.add_subcommand("dataset", "Dataset utilities");
  dataset_cmd->require_subcommand(1);
  ConfigArgs stats_args;
  auto* stats_cmd = dataset_cmd->add_subcommand("stats", "Ingest a dataset and print statistics");
  stats_args.attach(stats_cmd, false);
  std::string toy_out;
  ConfigArgs toy_args;
  auto* toy_cmd = dataset_cmd->add_subcommand("make-toy", "Write the synthetic toy dataset as tsv");
  toy_args.attach(toy_cmd, false);
  toy_cmd->add_option("-o,--out", toy_out, "Output tsv path")->required();

  // degradation
  auto* deg_cmd = app.add_subcommand("degradation", "Consensus degradation diagnostics");
  deg_cmd->require_subcommand(1);
  std::string deg_out;
  std::string delta_csv;
  std::string optima;
  int fixtures = 1000;
  int max_clients = 20;
  int max_dim = 8;
  std::uint64_t deg_seed = 42;
  auto* bound_cmd = deg_cmd->add_subcommand(
      "bound", "Check the degradation bound on quadratic clients");
  bound_cmd->add_option("--optima", optima, "CSV with one client optimum per line");
  bound_cmd->add_option("--fixtures", fixtures, "Random fixtures when no optima file is given")
      ->capture_default_str();
  bound_cmd->add_option("--max-clients", max_clients)->capture_default_str();
  bound_cmd->add_option("--max-dim", max_dim)->capture_default_str();
  bound_cmd->add_option("--seed", deg_seed)->capture_default_str();
  bound_cmd->add_option("--delta-csv", delta_csv, "Write the delta_ij matrix (optima mode)");
  bound_cmd->add_option("-o,--out", deg_out, "JSON output path (default stdout)");
  std::string vectors;
  auto* toyex_cmd = deg_cmd->add_subcommand("toy", "Prefix aggregation of client vectors");
  toyex_cmd->add_option("--vectors", vectors, "Vectors as x,y;x,y;...")->required();
  toyex_cmd->add_option("-o,--out", deg_out, "JSON output path (default stdout)");
  ConfigArgs probe_args;
  auto* probe_cmd = deg_cmd->add_subcommand(
      "probe", "Train, then measure gradient heterogeneity at the consensus");
  probe_args.attach(probe_cmd, false);
  probe_cmd->add_option("--delta-csv", delta_csv, "Write the pairwise delta matrix");
  probe_cmd->add_option("-o,--out", deg_out, "JSON output path (default stdout)");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitConfig;
    }

    if (*run_cmd) {
      const ExperimentConfig config = run_args.resolve();
      const ExperimentRecord r = run_experiment(config, run_args.options());
      const auto& m = r.final_metrics();
      out << "round " << m.round << ": hr@" << config.eval.k << "=" << m.hr_at_k << " ndcg@"
          << config.eval.k << "=" << m.ndcg_at_k << " (outputs in " << config.output.dir << ")\n";
    } else if (*ablate_cmd) {
      const ExperimentConfig config = ablate_args.resolve();
      const auto rows = ablate(config, split_list(variants, ','), ablate_args.options());
      out << ablation_csv(rows, config.eval.k);
    } else if (*sweep_cmd) {
      const ExperimentConfig config = sweep_args.resolve();
      const auto rows = sweep(config, param, split_list(values, ','), sweep_args.options());
      out << sweep_csv(param, rows, config.eval.k);
    } else if (*stats_cmd) {
      const ExperimentConfig config = stats_args.resolve();
      const auto& d = config.dataset;
      const InteractionDataset ds =
          d.source == DataSource::kToy
              ? build_dataset(generate_toy_records(d.toy), d.min_interactions)
              : load_dataset(d.path, d.format, d.min_interactions);
      out << compute_stats(ds).to_json() << '\n';
    } else if (*toy_cmd) {
      const ExperimentConfig config = toy_args.resolve();
      std::ofstream f(toy_out, std::ios::binary | std::ios::trunc);
      if (!f) throw RuntimeFailure("cannot write " + toy_out);
      write_interactions_tsv(generate_toy_records(config.dataset.toy), f);
    } else if (*bound_cmd) {
      if (!optima.empty()) {
        const DegradationReport r = verify_bound(read_optima(optima));
        if (!delta_csv.empty()) {
          std::ofstream f(delta_csv, std::ios::binary | std::ios::trunc);
          if (!f) throw RuntimeFailure("cannot write " + delta_csv);
          write_matrix_csv(r.delta, f);
        }
        emit(r.to_json(), deg_out, out);
        if (r.violations() > 0) return kExitRuntime;
      } else {
        const auto s = verify_random_fixtures(deg_seed, fixtures, max_clients, max_dim);
        emit(s.to_json(), deg_out, out);
        if (s.violations > 0) return kExitRuntime;
      }
    } else if (*toyex_cmd) {
      emit(toy_example_report(parse_vectors(vectors)).to_json(), deg_out, out);
    } else if (*probe_cmd) {
      const ExperimentConfig config = probe_args.resolve();
      const InteractionDataset ds = load_experiment_dataset(config.dataset, config.training.seed);
      const std::string json =
          config.training.precision == Precision::kF64
              ? probe_json<double>(config, ds, probe_args.workers, delta_csv)
              : probe_json<float>(config, ds, probe_args.workers, delta_csv);
      emit(json, deg_out, out);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    return report_error(err, kExitConfig, "config error", e.what());
  } catch (const ParseError& e) {
    return report_error(err, kExitData, "data error", e.what());
  } catch (const DataError& e) {
    return report_error(err, kExitData, "data error", e.what());
  } catch (const std::exception& e) {
    return report_error(err, kExitRuntime, "runtime failure", e.what());
  }
}

}  // namespace fed3cr::cli
