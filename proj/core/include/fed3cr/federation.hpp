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

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fed3cr/checkpoint.hpp"
#include "fed3cr/datasets.hpp"
#include "fed3cr/evaluation.hpp"
#include "fed3cr/losses.hpp"
#include "fed3cr/model.hpp"

namespace fed3cr {

enum class Precision { kF32, kF64 };

Precision parse_precision(const std::string& name);
std::string to_string(Precision p);

struct HyperParams {
  int rounds = 100;             // T
  int local_iterations = 10;    // E
  int dim = 32;                 // d
  int batch_size = 2048;
  int negatives_per_positive = 4;
  double client_fraction = 1.0;
  double lr = 0.1;
  double lr_gamma = 0.999;      // per local iteration
  double beta_a = 0.5;
  double beta_o = 0.5;
  AceInit ace_init = AceInit::kZero;
  double ace_scale = 1.0;
  TopOneMode top_one_mode = TopOneMode::kSoftmax;
  bool consistency_sample = false;
  int eval_negatives = 99;
  std::vector<int> layers{2, 4};  // transfer net widths in units of d
  Precision precision = Precision::kF32;
  std::uint64_t seed = 42;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct VariantConfig {
  std::string label = "Fed3CR";
  bool ace_enabled = true;
  bool consistency_enabled = true;
  bool orthogonality_enabled = true;
  EnhancementKind enhancement_kind = EnhancementKind::kAce;
  ComplementarityKind complementarity_kind = ComplementarityKind::kOrthogonal;
  BaseModel base_model = BaseModel::kDual;

  // C0..C6 and Fed3CR from the ablation grid:
  //   C0 none, C1 ACE, C2 L_a, C3 L_o, C4 L_a+L_o, C5 ACE+L_a, C6 ACE+L_o,
  //   Fed3CR ACE+L_a+L_o.
  static VariantConfig from_label(const std::string& label);
  static std::vector<std::string> ablation_labels();
  // Alternative enhancement with both auxiliary losses kept on.
  static VariantConfig enhancement_baseline(EnhancementKind kind);
  static VariantConfig fedmf(bool ace_plugin);

  // ace_enabled must agree with enhancement_kind; FedMF disables the
  // auxiliary losses.
  void validate() const;
};

ModelSpec make_model_spec(const HyperParams& hp, const VariantConfig& variant, int num_items);
LossConfig make_loss_config(const HyperParams& hp, const VariantConfig& variant);

template <typename T>
struct ServerState {
  BasicMatrix<T> consensus;  // C
  TransferNet<T> net;        // aggregated theta
  int round = 0;
};

template <typename T>
ServerState<T> init_server(std::uint64_t seed, const ModelSpec& spec);

// Elementwise mean in the given order. Throws RuntimeFailure when empty and
// ShapeError on mismatched shapes.
template <typename T>
BasicMatrix<T> aggregate_consensus(std::span<const BasicMatrix<T>> uploads);

// Blockwise mean of weights and biases. Throws ConfigError on schedule
// mismatch.
template <typename T>
TransferNet<T> aggregate_theta(std::span<const TransferNet<T>> uploads);

// Sorts uploads by client id, then aggregates both parts, so the result does
// not depend on arrival order.
template <typename T>
void aggregate_into(ServerState<T>& server, std::vector<std::pair<int, ClientUpload<T>>> uploads);

// ceil(fraction * n) distinct ids, sorted, deterministic in (seed, round).
std::vector<int> select_clients(int n, double fraction, int round, std::uint64_t seed);

template <typename T>
struct LocalUpdateResult {
  bool ok = false;
  std::string error;
  ClientUpload<T> upload;
  LossBreakdown mean_loss;
};

// Overwrites C_i and theta_i with the downloads, then runs E SGD iterations
// on the combined objective with learning rate lr * lr_gamma^iterations.
// Only C_i and theta_i are returned. On a non-finite loss or parameter the
// client state is restored and ok is false.
template <typename T>
LocalUpdateResult<T> local_update(ClientState<T>& state, const BasicMatrix<T>& consensus,
                                  const TransferNet<T>& theta, const InteractionDataset& ds,
                                  const NegativeSampler& sampler, const HyperParams& hp,
                                  const VariantConfig& variant, int round,
                                  Warnings* warnings = nullptr);

// Receives every serialized upload before the server decodes it.
using UploadObserver = std::function<void(int round, int client, std::string_view bytes)>;

struct EvalOptions {
  int interval = 1;  // evaluate every `interval` rounds and after the last one
  int k = 10;
  int k_prime = 50;
  double rbo_p = 0.99;
  bool rbo = true;
  bool full_ranking = false;  // rank against every non-train item
  // Keep sampled evaluation candidates out of the training negatives.
  bool hold_out_candidates = true;
};

struct TrainingOptions {
  int workers = 1;
  EvalOptions eval;
  UploadObserver upload_observer;
  // Called after every round with its wall-clock seconds.
  std::function<void(int round, double seconds)> on_round_end;
  // Called with every evaluated row as soon as it exists.
  std::function<void(const RoundMetrics&)> on_metrics;
};

template <typename T>
struct TrainingResult {
  ServerState<T> server;
  std::vector<RoundMetrics> metrics;
  std::vector<ClientState<T>> clients;
  std::vector<std::string> warnings;
};

// Per-client metrics under the current client states.
template <typename T>
RoundMetrics evaluate_clients(const std::vector<ClientState<T>>& clients,
                              const InteractionDataset& ds,
                              const std::vector<std::vector<int>>& candidates,
                              const ModelSpec& spec, const EvalOptions& eval, int workers);

// The server procedure: T rounds of select, parallel local updates,
// serialized uploads, aggregation of C and theta, evaluation. Throws
// RuntimeFailure when every selected client fails in a round.
template <typename T>
TrainingResult<T> run_training(const InteractionDataset& ds, const HyperParams& hp,
                               const VariantConfig& variant, const TrainingOptions& options);

template <typename T>
std::vector<RoundMetrics> fedmf_baseline(const InteractionDataset& ds, const HyperParams& hp,
                                         bool ace_plugin, const TrainingOptions& options);

}  // namespace fed3cr
