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

#include "fed3cr/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "fed3cr/errors.hpp"
#include "fed3cr/parallel.hpp"
#include "fed3cr/random.hpp"

namespace fed3cr {
namespace {

constexpr std::uint64_t kSelectKey = 0x5E1EC7ULL;
constexpr std::uint64_t kServerKey = 0x5E7E7ULL;
constexpr std::uint64_t kTrainKey = 0x7A1ULL;

template <typename T>
bool state_finite(const ClientState<T>& s) {
  if (!all_finite<T>(s.user.span()) || !all_finite<T>(s.global_table.span()) ||
      !all_finite<T>(s.personal_table.span())) {
    return false;
  }
  for (std::size_t l = 0; l < s.net.num_layers(); ++l) {
    if (!all_finite<T>(s.net.weights[l].span()) || !all_finite<T>(s.net.biases[l].span())) {
      return false;
    }
  }
  return true;
}

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, T lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

}  // namespace

Precision parse_precision(const std::string& name) {
  if (name == "f32") return Precision::kF32;
  if (name == "f64") return Precision::kF64;
  throw ConfigError("unknown precision '" + name + "' (expected f32 | f64)");
}

std::string to_string(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

void HyperParams::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("training." + field + ": " + why);
  };
  if (rounds < 1) fail("rounds", "must be >= 1");
  if (local_iterations < 1) fail("local_iterations", "must be >= 1");
  if (dim < 1) fail("dim", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (negatives_per_positive < 0) fail("negatives_per_positive", "must be >= 0");
  if (!(client_fraction > 0.0 && client_fraction <= 1.0)) fail("client_fraction", "must lie in (0, 1]");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr", "must be > 0");
  if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) fail("lr_gamma", "must lie in (0, 1]");
  if (!(beta_a >= 0.0) || !std::isfinite(beta_a)) fail("beta_a", "must be >= 0");
  if (!(beta_o >= 0.0) || !std::isfinite(beta_o)) fail("beta_o", "must be >= 0");
  if (!(ace_scale > 0.0) || !std::isfinite(ace_scale)) fail("ace_scale", "must be > 0");
  if (eval_negatives < 0) fail("eval_negatives", "must be >= 0");
  if (layers.empty()) fail("layers", "must name at least the input width");
  for (int m : layers)
    if (m < 1) fail("layers", "multipliers must be >= 1");
}

VariantConfig VariantConfig::from_label(const std::string& label) {
  struct Row {
    const char* label;
    bool ace, la, lo;
  };
  static constexpr Row kRows[] = {
      {"C0", false, false, false}, {"C1", true, false, false}, {"C2", false, true, false},
      {"C3", false, false, true},  {"C4", false, true, true},  {"C5", true, true, false},
      {"C6", true, false, true},   {"Fed3CR", true, true, true},
  };
  for (const auto& r : kRows) {
    if (label == r.label) {
      VariantConfig v;
      v.label = label;
      v.ace_enabled = r.ace;
      v.consistency_enabled = r.la;
      v.orthogonality_enabled = r.lo;
      v.enhancement_kind = r.ace ? EnhancementKind::kAce : EnhancementKind::kNone;
      return v;
    }
  }
  throw ConfigError("unknown variant label '" + label + "' (expected C0..C6 or Fed3CR)");
}

std::vector<std::string> VariantConfig::ablation_labels() {
  return {"C0", "C1", "C2", "C3", "C4", "C5", "C6", "Fed3CR"};
}

VariantConfig VariantConfig::enhancement_baseline(EnhancementKind kind) {
  if (kind != EnhancementKind::kConsensusTransfer && kind != EnhancementKind::kUnifiedTransfer) {
    throw ConfigError("enhancement baseline must be consensus-transfer or unified-transfer");
  }
  VariantConfig v;
  v.label = to_string(kind);
  v.ace_enabled = false;
  v.enhancement_kind = kind;
  return v;
}

VariantConfig VariantConfig::fedmf(bool ace_plugin) {
  VariantConfig v;
  v.label = ace_plugin ? "FedMF+ACE" : "FedMF";
  v.ace_enabled = ace_plugin;
  v.consistency_enabled = false;
  v.orthogonality_enabled = false;
  v.enhancement_kind = ace_plugin ? EnhancementKind::kAce : EnhancementKind::kNone;
  v.base_model = BaseModel::kFedMf;
  return v;
}

void VariantConfig::validate() const {
  if (ace_enabled != (enhancement_kind == EnhancementKind::kAce)) {
    throw ConfigError("variant.ace_enabled disagrees with variant.enhancement_kind=" +
                      to_string(enhancement_kind));
  }
  if (base_model == BaseModel::kFedMf) {
    if (consistency_enabled || orthogonality_enabled) {
      throw ConfigError("variant.base_model=fedmf has no personal table; disable both auxiliary losses");
    }
    if (enhancement_kind != EnhancementKind::kNone && enhancement_kind != EnhancementKind::kAce) {
      throw ConfigError("variant.base_model=fedmf supports enhancement_kind none or ace only");
    }
  }
}

ModelSpec make_model_spec(const HyperParams& hp, const VariantConfig& variant, int num_items) {
  ModelSpec spec;
  spec.dim = hp.dim;
  spec.num_items = num_items;
  spec.layer_multipliers = hp.layers;
  spec.enhancement = variant.enhancement_kind;
  spec.base = variant.base_model;
  spec.ace_init = hp.ace_init;
  spec.ace_scale = hp.ace_scale;
  return spec;
}

LossConfig make_loss_config(const HyperParams& hp, const VariantConfig& variant) {
  LossConfig c;
  c.beta_a = hp.beta_a;
  c.beta_o = hp.beta_o;
  c.consistency_enabled = variant.consistency_enabled;
  c.complementarity_enabled = variant.orthogonality_enabled;
  c.complementarity = variant.complementarity_kind;
  c.top_one_mode = hp.top_one_mode;
  c.consistency_sample = hp.consistency_sample;
  return c;
}

template <typename T>
ServerState<T> init_server(std::uint64_t seed, const ModelSpec& spec) {
  auto rng = make_stream(seed, {kServerKey});
  ServerState<T> s;
  s.consensus = random_table<T>(rng, spec.num_items, spec.dim);
  auto [widths, out] = transfer_net_shape(spec);
  s.net = make_transfer_net<T>(widths, out);
  init_transfer_net(s.net, rng, spec);
  return s;
}

template <typename T>
BasicMatrix<T> aggregate_consensus(std::span<const BasicMatrix<T>> uploads) {
  if (uploads.empty()) throw RuntimeFailure("aggregate_consensus: no uploads to aggregate");
  const auto& first = uploads.front();
  std::vector<double> acc(first.size(), 0.0);
  for (const auto& u : uploads) {
    require_same_shape(first, u, "aggregate_consensus");
    const auto s = u.span();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(s[i]);
  }
  BasicMatrix<T> out(first.rows(), first.cols());
  const double inv = 1.0 / static_cast<double>(uploads.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out.data()[i] = static_cast<T>(acc[i] * inv);
  return out;
}

template <typename T>
TransferNet<T> aggregate_theta(std::span<const TransferNet<T>> uploads) {
  if (uploads.empty()) throw RuntimeFailure("aggregate_theta: no uploads to aggregate");
  const auto& first = uploads.front();
  for (const auto& u : uploads) {
    if (!u.same_schedule(first)) throw ConfigError("aggregate_theta: transfer net schedules differ");
  }
  std::vector<double> acc(first.parameter_count(), 0.0);
  for (const auto& u : uploads) {
    const auto flat = u.flatten();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(flat[i]);
  }
  const double inv = 1.0 / static_cast<double>(uploads.size());
  std::vector<T> mean(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) mean[i] = static_cast<T>(acc[i] * inv);
  TransferNet<T> out = make_transfer_net<T>(first.widths, first.output_dim);
  out.assign_flat(mean);
  return out;
}

template <typename T>
void aggregate_into(ServerState<T>& server, std::vector<std::pair<int, ClientUpload<T>>> uploads) {
  std::sort(uploads.begin(), uploads.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<BasicMatrix<T>> tables;
  std::vector<TransferNet<T>> nets;
  tables.reserve(uploads.size());
  nets.reserve(uploads.size());
  for (auto& [id, up] : uploads) {
    tables.push_back(std::move(up.global_table));
    nets.push_back(std::move(up.net));
  }
  server.consensus = aggregate_consensus<T>(tables);
  server.net = aggregate_theta<T>(nets);
  if (!all_finite<T>(server.consensus.span())) {
    throw RuntimeFailure("aggregated consensus is not finite");
  }
}

std::vector<int> select_clients(int n, double fraction, int round, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("select_clients: fraction must lie in (0, 1]");
  }
  if (n <= 0) return {};
  // Guard against 0.3 * 10 = 3.0000000000000004.
  const double raw = fraction * static_cast<double>(n);
  int k = static_cast<int>(std::ceil(raw - 1e-9));
  k = std::clamp(k, 1, n);
  std::vector<int> ids;
  if (k == n) {
    ids.resize(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    return ids;
  }
  auto rng = make_stream(seed, {kSelectKey, static_cast<std::uint64_t>(round)});
  for (auto v : sample_without_replacement(rng, static_cast<std::size_t>(n), static_cast<std::size_t>(k))) {
    ids.push_back(static_cast<int>(v));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

template <typename T>
LocalUpdateResult<T> local_update(ClientState<T>& state, const BasicMatrix<T>& consensus,
                                  const TransferNet<T>& theta, const InteractionDataset& ds,
                                  const NegativeSampler& sampler, const HyperParams& hp,
                                  const VariantConfig& variant, int round, Warnings* warnings) {
  require_same_shape(state.global_table, consensus, "local_update");
  if (!state.net.same_schedule(theta)) {
    throw ConfigError("local_update: downloaded transfer net schedule differs from client's");
  }
  const auto& positives = ds.client(state.client_id).items;
  if (positives.empty()) {
    throw DataError("client " + std::to_string(state.client_id) + " has no train positives");
  }
  const ModelSpec spec = make_model_spec(hp, variant, ds.num_items());
  const LossConfig loss_cfg = make_loss_config(hp, variant);

  const ClientState<T> snapshot = state;
  state.global_table = consensus;
  state.net = theta;

  LocalUpdateResult<T> result;
  auto fail = [&](const std::string& what) {
    state = snapshot;
    result.ok = false;
    result.error = "round " + std::to_string(round) + ", client " +
                   std::to_string(state.client_id) + ": " + what;
    return result;
  };

  LossBreakdown sum;
  for (int e = 0; e < hp.local_iterations; ++e) {
    auto rng = make_stream(hp.seed, {kTrainKey, static_cast<std::uint64_t>(round),
                                     static_cast<std::uint64_t>(state.client_id),
                                     static_cast<std::uint64_t>(e)});
    const TrainingBatch batch = sampler.sample(state.client_id, hp.batch_size, rng, warnings);
    const ForwardTrace<T> trace = forward(state, positives, spec);
    auto grads = ClientGradients<T>::zeros_like(state);
    const LossBreakdown loss =
        total_loss(state, trace, batch, positives, spec, loss_cfg, &grads, warnings);
    if (!std::isfinite(loss.total)) return fail("non-finite loss");

    const T lr = static_cast<T>(hp.lr * std::pow(hp.lr_gamma, static_cast<double>(state.iterations)));
    sgd_step<T>(state.user.span(), grads.user.span(), lr);
    sgd_step<T>(state.global_table.span(), grads.global_table.span(), lr);
    sgd_step<T>(state.personal_table.span(), grads.personal_table.span(), lr);
    state.net.add_scaled(-lr, grads.net);
    ++state.iterations;

    sum.l_rec += loss.l_rec;
    sum.l_a += loss.l_a;
    sum.l_o += loss.l_o;
    sum.total += loss.total;
    sum.beta_a = loss.beta_a;
    sum.beta_o = loss.beta_o;
  }
  if (!state_finite(state)) return fail("non-finite parameters after update");

  const double inv = 1.0 / hp.local_iterations;
  result.mean_loss = sum;
  result.mean_loss.l_rec *= inv;
  result.mean_loss.l_a *= inv;
  result.mean_loss.l_o *= inv;
  result.mean_loss.total *= inv;
  result.ok = true;
  result.upload.global_table = state.global_table;
  result.upload.net = state.net;
  return result;
}

template <typename T>
RoundMetrics evaluate_clients(const std::vector<ClientState<T>>& clients,
                              const InteractionDataset& ds,
                              const std::vector<std::vector<int>>& candidates,
                              const ModelSpec& spec, const EvalOptions& eval, int workers) {
  struct Slot {
    HitNdcg hit;
    double rbo = 0.0;
    bool evaluated = false;
  };
  std::vector<Slot> slots(clients.size());
  parallel_for(clients.size(), workers, [&](std::size_t i) {
    const auto& state = clients[i];
    const auto& data = ds.client(state.client_id);
    if (!data.has_test_item() || data.items.empty()) return;
    const ForwardTrace<T> trace = forward(state, data.items, spec);
    const auto ranked = rank_candidates<T>(state.user.span(), trace.fused, candidates[i]);
    slots[i].hit = hr_ndcg_at_k(ranked, data.test_item, eval.k);
    if (eval.rbo && spec.has_personal_table()) {
      slots[i].rbo = view_consistency_rbo(state, trace, eval.k_prime, eval.rbo_p);
    }
    slots[i].evaluated = true;
  });
  RoundMetrics m;
  for (const auto& s : slots) {
    if (!s.evaluated) continue;
    m.hr_at_k += s.hit.hr;
    m.ndcg_at_k += s.hit.ndcg;
    m.rbo += s.rbo;
    ++m.clients_evaluated;
  }
  if (m.clients_evaluated > 0) {
    m.hr_at_k /= m.clients_evaluated;
    m.ndcg_at_k /= m.clients_evaluated;
    m.rbo /= m.clients_evaluated;
  }
  m.has_rbo = eval.rbo && spec.has_personal_table() && m.clients_evaluated > 0;
  return m;
}

template <typename T>
TrainingResult<T> run_training(const InteractionDataset& ds, const HyperParams& hp,
                               const VariantConfig& variant, const TrainingOptions& options) {
  hp.validate();
  variant.validate();
  if (!ds.is_split()) throw ProtocolError("run_training: dataset must be split first");
  if (options.eval.interval < 1) throw ConfigError("eval.interval: must be >= 1");

  const ModelSpec spec = make_model_spec(hp, variant, ds.num_items());
  const int n = ds.num_clients();
  NegativeSampler sampler(ds, hp.negatives_per_positive);

  TrainingResult<T> result;
  result.server = init_server<T>(hp.seed, spec);
  result.clients.reserve(n);
  for (int i = 0; i < n; ++i) result.clients.push_back(init_client<T>(hp.seed, i, spec));

  Warnings setup_warnings;
  std::vector<std::vector<int>> candidates(n);
  for (int i = 0; i < n; ++i) {
    if (options.eval.full_ranking) {
      candidates[i] = sampler.candidate_universe(i);
      candidates[i].insert(candidates[i].begin(), ds.client(i).test_item);
    } else {
      candidates[i] = build_eval_candidates(ds, i, hp.eval_negatives, hp.seed, &setup_warnings);
    }
  }
  if (options.eval.hold_out_candidates && !options.eval.full_ranking) {
    for (int i = 0; i < n; ++i) sampler.hold_out(i, candidates[i]);
  }
  for (auto& w : setup_warnings.messages) result.warnings.push_back(std::move(w));

  for (int round = 1; round <= hp.rounds; ++round) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<int> selected = select_clients(n, hp.client_fraction, round, hp.seed);
    std::vector<LocalUpdateResult<T>> updates(selected.size());
    std::vector<Warnings> warnings(selected.size());
    parallel_for(selected.size(), options.workers, [&](std::size_t k) {
      const int id = selected[k];
      updates[k] = local_update(result.clients[id], result.server.consensus, result.server.net,
                                ds, sampler, hp, variant, round, &warnings[k]);
    });

    // Uploads cross the channel serialized, in client-id order.
    std::vector<std::pair<int, ClientUpload<T>>> received;
    RoundMetrics losses;
    for (std::size_t k = 0; k < selected.size(); ++k) {
      for (auto& w : warnings[k].messages) {
        if (std::find(result.warnings.begin(), result.warnings.end(), w) == result.warnings.end()) {
          result.warnings.push_back(std::move(w));
        }
      }
      if (!updates[k].ok) {
        result.warnings.push_back(updates[k].error);
        continue;
      }
      CheckpointMeta meta;
      meta.seed = hp.seed;
      meta.round = round;
      meta.client_id = selected[k];
      const std::string bytes = encode_upload(updates[k].upload, meta);
      if (options.upload_observer) options.upload_observer(round, selected[k], bytes);
      received.emplace_back(selected[k], decode_upload<T>(bytes));
      losses.loss_rec += updates[k].mean_loss.l_rec;
      losses.loss_a += updates[k].mean_loss.l_a;
      losses.loss_o += updates[k].mean_loss.l_o;
      ++losses.clients_trained;
    }
    if (received.empty()) {
      throw RuntimeFailure("round " + std::to_string(round) + ": every selected client failed");
    }
    aggregate_into(result.server, std::move(received));
    result.server.round = round;

    if (round % options.eval.interval == 0 || round == hp.rounds) {
      RoundMetrics m = evaluate_clients(result.clients, ds, candidates, spec, options.eval,
                                        options.workers);
      m.round = round;
      m.clients_trained = losses.clients_trained;
      m.loss_rec = losses.loss_rec / losses.clients_trained;
      m.loss_a = losses.loss_a / losses.clients_trained;
      m.loss_o = losses.loss_o / losses.clients_trained;
      m.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.metrics.push_back(m);
      if (options.on_metrics) options.on_metrics(m);
    }
    if (options.on_round_end) {
      options.on_round_end(
          round, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
  }
  return result;
}

template <typename T>
std::vector<RoundMetrics> fedmf_baseline(const InteractionDataset& ds, const HyperParams& hp,
                                         bool ace_plugin, const TrainingOptions& options) {
  return run_training<T>(ds, hp, VariantConfig::fedmf(ace_plugin), options).metrics;
}

#define FED3CR_INSTANTIATE_FED(T)                                                              \
  template ServerState<T> init_server<T>(std::uint64_t, const ModelSpec&);                     \
  template BasicMatrix<T> aggregate_consensus<T>(std::span<const BasicMatrix<T>>);             \
  template TransferNet<T> aggregate_theta<T>(std::span<const TransferNet<T>>);                 \
  template void aggregate_into<T>(ServerState<T>&,                                             \
                                  std::vector<std::pair<int, ClientUpload<T>>>);               \
  template LocalUpdateResult<T> local_update<T>(                                               \
      ClientState<T>&, const BasicMatrix<T>&, const TransferNet<T>&,                           \
      const InteractionDataset&, const NegativeSampler&, const HyperParams&,                   \
      const VariantConfig&, int, Warnings*);                                                   \
  template RoundMetrics evaluate_clients<T>(const std::vector<ClientState<T>>&,                \
                                            const InteractionDataset&,                         \
                                            const std::vector<std::vector<int>>&,              \
                                            const ModelSpec&, const EvalOptions&, int);        \
  template TrainingResult<T> run_training<T>(const InteractionDataset&, const HyperParams&,     \
                                             const VariantConfig&, const TrainingOptions&);    \
  template std::vector<RoundMetrics> fedmf_baseline<T>(const InteractionDataset&,              \
                                                       const HyperParams&, bool,               \
                                                       const TrainingOptions&);

FED3CR_INSTANTIATE_FED(float)
FED3CR_INSTANTIATE_FED(double)

#undef FED3CR_INSTANTIATE_FED

}  // namespace fed3cr
