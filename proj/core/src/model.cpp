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

#include "fed3cr/model.hpp"

#include <cmath>
#include <random>

#include "fed3cr/errors.hpp"
#include "fed3cr/random.hpp"

namespace fed3cr {

AceInit parse_ace_init(const std::string& name) {
  if (name == "zero") return AceInit::kZero;
  if (name == "identity") return AceInit::kIdentity;
  throw ConfigError("unknown ace_init '" + name + "' (expected zero or identity)");
}

std::string to_string(AceInit v) {
  return v == AceInit::kZero ? "zero" : "identity";
}

EnhancementKind parse_enhancement_kind(const std::string& name) {
  if (name == "none") return EnhancementKind::kNone;
  if (name == "ace") return EnhancementKind::kAce;
  if (name == "consensus-transfer") return EnhancementKind::kConsensusTransfer;
  if (name == "unified-transfer") return EnhancementKind::kUnifiedTransfer;
  throw ConfigError("unknown enhancement_kind '" + name +
                    "' (expected ace, consensus-transfer, unified-transfer or none)");
}

std::string to_string(EnhancementKind v) {
  switch (v) {
    case EnhancementKind::kNone: return "none";
    case EnhancementKind::kAce: return "ace";
    case EnhancementKind::kConsensusTransfer: return "consensus-transfer";
    case EnhancementKind::kUnifiedTransfer: return "unified-transfer";
  }
  return "none";
}

BaseModel parse_base_model(const std::string& name) {
  if (name == "dual") return BaseModel::kDual;
  if (name == "fedmf") return BaseModel::kFedMf;
  throw ConfigError("unknown base_model '" + name + "' (expected dual or fedmf)");
}

std::string to_string(BaseModel v) { return v == BaseModel::kDual ? "dual" : "fedmf"; }

// ---------------------------------------------------------------------------
// TransferNet

template <typename T>
std::size_t TransferNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

template <typename T>
std::vector<T> TransferNet<T>::flatten() const {
  std::vector<T> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.insert(flat.end(), weights[l].values().begin(), weights[l].values().end());
    flat.insert(flat.end(), biases[l].values().begin(), biases[l].values().end());
  }
  return flat;
}

template <typename T>
void TransferNet<T>::assign_flat(std::span<const T> flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("TransferNet::assign_flat: expected " +
                     std::to_string(parameter_count()) + " values, got " +
                     std::to_string(flat.size()));
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (auto& v : weights[l].span()) v = flat[off++];
    for (auto& v : biases[l].span()) v = flat[off++];
  }
}

template <typename T>
void TransferNet<T>::fill(T v) {
  for (auto& w : weights) w.fill(v);
  for (auto& b : biases) b.fill(v);
}

template <typename T>
void TransferNet<T>::add_scaled(T s, const TransferNet& other) {
  if (!same_schedule(other)) throw ShapeError("TransferNet::add_scaled: schedule mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    axpy<T>(s, other.weights[l].span(), weights[l].span());
    axpy<T>(s, other.biases[l].span(), biases[l].span());
  }
}

template <typename T>
TransferNet<T> make_transfer_net(const std::vector<int>& widths, int output_dim) {
  if (widths.empty() || output_dim <= 0) {
    throw ConfigError("transfer net needs at least an input width and an output");
  }
  TransferNet<T> net;
  net.widths = widths;
  net.output_dim = output_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = l + 1 < widths.size() ? widths[l + 1] : output_dim;
    if (fan_in <= 0 || fan_out <= 0) throw ConfigError("transfer net widths must be positive");
    net.weights.emplace_back(fan_out, fan_in);
    net.biases.emplace_back(fan_out);
  }
  return net;
}

template <typename T>
BasicVector<T> mlp_forward(const TransferNet<T>& net, std::span<const T> input,
                           MlpCache<T>* cache) {
  if (static_cast<int>(input.size()) != net.input_dim()) {
    throw ShapeError("mlp_forward: input width " + std::to_string(input.size()) +
                     " != " + std::to_string(net.input_dim()));
  }
  if (cache != nullptr) {
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
  }
  BasicVector<T> x(std::vector<T>(input.begin(), input.end()));
  const std::size_t layers = net.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    BasicVector<T> z = matvec(net.weights[l], x.span());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] += net.biases[l][k];
    if (cache != nullptr) cache->layer_inputs.push_back(x);
    if (l + 1 < layers) {
      if (cache != nullptr) cache->pre_activations.push_back(z);
      for (auto& v : z) v = v > T(0) ? v : T(0);
    }
    x = std::move(z);
  }
  return x;
}

template <typename T>
void mlp_backward(const TransferNet<T>& net, const MlpCache<T>& cache,
                  std::span<const T> dout, TransferNet<T>& grad,
                  std::span<T> dinput) {
  const std::size_t layers = net.num_layers();
  BasicVector<T> delta(std::vector<T>(dout.begin(), dout.end()));
  for (std::size_t l = layers; l-- > 0;) {
    const auto& in = cache.layer_inputs[l];
    const auto& w = net.weights[l];
    auto& gw = grad.weights[l];
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const T dr = delta[r];
      if (dr == T(0)) continue;
      grad.biases[l][r] += dr;
      T* g = gw.row(r).data();
      for (std::size_t c = 0; c < w.cols(); ++c) g[c] += dr * in[c];
    }
    if (l == 0 && dinput.empty()) break;
    BasicVector<T> prev(w.cols());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const T dr = delta[r];
      if (dr == T(0)) continue;
      const T* wr = w.row(r).data();
      for (std::size_t c = 0; c < w.cols(); ++c) prev[c] += dr * wr[c];
    }
    if (l == 0) {
      for (std::size_t c = 0; c < prev.size(); ++c) dinput[c] += prev[c];
      break;
    }
    const auto& pre = cache.pre_activations[l - 1];
    for (std::size_t c = 0; c < prev.size(); ++c) {
      if (!(pre[c] > T(0))) prev[c] = T(0);
    }
    delta = std::move(prev);
  }
}

// ---------------------------------------------------------------------------
// Client state

std::pair<std::vector<int>, int> transfer_net_shape(const ModelSpec& spec) {
  if (spec.dim < 1) throw ConfigError("embedding dim must be >= 1");
  if (spec.layer_multipliers.empty()) throw ConfigError("layer schedule is empty");
  std::vector<int> widths;
  if (spec.enhancement == EnhancementKind::kAce || spec.enhancement == EnhancementKind::kNone) {
    if (spec.layer_multipliers.front() != 2) {
      throw ConfigError("ACE layer schedule must start at 2d");
    }
    for (int m : spec.layer_multipliers) widths.push_back(m * spec.dim);
    return {widths, spec.dim * spec.dim};
  }
  // Row-wise transfer: input d, hidden widths follow the schedule tail.
  widths.push_back(spec.dim);
  for (std::size_t l = 1; l < spec.layer_multipliers.size(); ++l) {
    widths.push_back(spec.layer_multipliers[l] * spec.dim);
  }
  return {widths, spec.dim};
}

template <typename T>
ClientGradients<T> ClientGradients<T>::zeros_like(const ClientState<T>& s) {
  ClientGradients g;
  g.user = BasicVector<T>(s.user.dim());
  g.global_table = BasicMatrix<T>(s.global_table.rows(), s.global_table.cols());
  g.personal_table = BasicMatrix<T>(s.personal_table.rows(), s.personal_table.cols());
  g.net = s.net;
  g.net.fill(T(0));
  return g;
}

template <typename T>
BasicMatrix<T> random_table(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 0.01);
  BasicMatrix<T> m(rows, cols);
  for (auto& v : m.span()) v = static_cast<T>(normal(rng));
  return m;
}

template <typename T>
void init_transfer_net(TransferNet<T>& net, std::mt19937_64& rng, const ModelSpec& spec) {
  const std::size_t layers = net.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const bool last = l + 1 == layers;
    const double bound = last ? 1e-3 : 1.0 / std::sqrt(static_cast<double>(net.widths[l]));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (auto& v : net.weights[l].span()) v = static_cast<T>(uni(rng));
    net.biases[l].fill(T(0));
  }
  if (spec.enhancement == EnhancementKind::kAce && spec.ace_init == AceInit::kIdentity) {
    auto& bias = net.biases.back();
    const T diag = static_cast<T>(1.0 / spec.ace_scale);
    for (int i = 0; i < spec.dim; ++i) bias[static_cast<std::size_t>(i * spec.dim + i)] = diag;
  }
}

template <typename T>
ClientState<T> init_client(std::uint64_t seed, int client_id, const ModelSpec& spec) {
  if (spec.dim < 1 || spec.num_items < 1) throw ConfigError("init_client: need d >= 1 and M >= 1");
  auto rng = make_stream(seed, {0xC11E47ULL, static_cast<std::uint64_t>(client_id)});
  ClientState<T> s;
  s.client_id = client_id;
  s.user = BasicVector<T>(spec.dim);
  std::normal_distribution<double> normal(0.0, 0.01);
  for (auto& v : s.user) v = static_cast<T>(normal(rng));
  s.global_table = random_table<T>(rng, spec.num_items, spec.dim);
  s.personal_table = spec.has_personal_table()
                         ? random_table<T>(rng, spec.num_items, spec.dim)
                         : BasicMatrix<T>(0, spec.dim);
  auto [widths, out] = transfer_net_shape(spec);
  s.net = make_transfer_net<T>(widths, out);
  init_transfer_net(s.net, rng, spec);
  return s;
}

// ---------------------------------------------------------------------------
// Forward pieces

template <typename T>
BasicVector<T> row_mean(const BasicMatrix<T>& table, std::span<const int> rows) {
  if (rows.empty()) throw DataError("prototype of an empty positive set");
  BasicVector<T> out(table.cols());
  for (int j : rows) {
    if (j < 0 || static_cast<std::size_t>(j) >= table.rows()) {
      throw ShapeError("row index " + std::to_string(j) + " out of range");
    }
    axpy<T>(T(1), table.row(j), out.span());
  }
  const T inv = T(1) / static_cast<T>(rows.size());
  for (auto& v : out) v *= inv;
  return out;
}

template <typename T>
std::pair<BasicVector<T>, BasicVector<T>> compute_prototypes(
    const BasicMatrix<T>& global_table, const BasicMatrix<T>& personal_table,
    std::span<const int> positives) {
  return {row_mean(global_table, positives), row_mean(personal_table, positives)};
}

template <typename T>
BasicMatrix<T> generate_transfer_matrix(const TransferNet<T>& net,
                                        const BasicVector<T>& p_global,
                                        const BasicVector<T>& p_personal, T scale,
                                        MlpCache<T>* cache) {
  const std::size_t d = p_global.dim();
  if (p_personal.dim() != d) throw ShapeError("generate_transfer_matrix: prototype dims differ");
  if (static_cast<std::size_t>(net.output_dim) != d * d) {
    throw ShapeError("generate_transfer_matrix: net output is not d*d");
  }
  std::vector<T> input(2 * d);
  std::copy(p_global.begin(), p_global.end(), input.begin());
  std::copy(p_personal.begin(), p_personal.end(), input.begin() + d);
  BasicVector<T> out = mlp_forward(net, std::span<const T>(input), cache);
  BasicMatrix<T> w(d, d, std::vector<T>(out.begin(), out.end()));
  if (scale != T(1)) {
    for (auto& v : w.span()) v *= scale;
  }
  return w;
}

template <typename T>
BasicMatrix<T> enhance_consensus(const BasicMatrix<T>& transfer,
                                 const BasicMatrix<T>& consensus) {
  if (transfer.rows() != transfer.cols() || transfer.cols() != consensus.cols()) {
    throw ShapeError("enhance_consensus: W is " + shape_string(transfer.rows(), transfer.cols()) +
                     ", C is " + shape_string(consensus.rows(), consensus.cols()));
  }
  return matmul_bt(consensus, transfer);
}

template <typename T>
BasicMatrix<T> fuse(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal) {
  require_same_shape(enhanced, personal, "fuse");
  return add(enhanced, personal);
}

template <typename T>
T predict(std::span<const T> user, std::span<const T> item) {
  return sigmoid(dot(user, item));
}

namespace {

template <typename T>
BasicMatrix<T> residual_rows(const TransferNet<T>& net, const BasicMatrix<T>& table,
                             std::vector<MlpCache<T>>& caches) {
  BasicMatrix<T> out = table;
  caches.assign(table.rows(), MlpCache<T>{});
  for (std::size_t j = 0; j < table.rows(); ++j) {
    BasicVector<T> delta = mlp_forward(net, table.row(j), &caches[j]);
    axpy<T>(T(1), delta.span(), out.row(j));
  }
  return out;
}

template <typename T>
void residual_rows_backward(const TransferNet<T>& net, const std::vector<MlpCache<T>>& caches,
                            const BasicMatrix<T>& upstream, BasicMatrix<T>& dtable,
                            TransferNet<T>& dnet) {
  for (std::size_t j = 0; j < upstream.rows(); ++j) {
    auto g = upstream.row(j);
    bool nonzero = false;
    for (T v : g) nonzero |= v != T(0);
    if (!nonzero) continue;
    axpy<T>(T(1), g, dtable.row(j));
    mlp_backward(net, caches[j], g, dnet, dtable.row(j));
  }
}

template <typename T>
void scatter_mean(std::span<const T> grad, std::span<const int> rows, BasicMatrix<T>& dtable) {
  const T inv = T(1) / static_cast<T>(rows.size());
  for (int j : rows) axpy<T>(inv, grad, dtable.row(j));
}

}  // namespace

template <typename T>
ForwardTrace<T> forward(const ClientState<T>& state, std::span<const int> positives,
                        const ModelSpec& spec) {
  if (positives.empty()) throw DataError("forward: client has no positives");
  ForwardTrace<T> tr;
  const auto& C = state.global_table;
  const std::size_t d = C.cols();
  tr.p_global = row_mean(C, positives);
  const T scale = static_cast<T>(spec.ace_scale);

  if (spec.base == BaseModel::kFedMf) {
    tr.p_personal = tr.p_global;
    tr.personal_view = C;
    tr.p_view = tr.p_global;
    if (spec.enhancement == EnhancementKind::kAce) {
      tr.transfer = generate_transfer_matrix(state.net, tr.p_global, tr.p_global, scale,
                                             &tr.transfer_cache);
      tr.enhanced = enhance_consensus(tr.transfer, C);
      tr.p_enhanced = matvec(tr.transfer, tr.p_global.span());
    } else if (spec.enhancement == EnhancementKind::kNone) {
      tr.transfer = BasicMatrix<T>(d, d);
      tr.enhanced = BasicMatrix<T>(C.rows(), d);
      tr.p_enhanced = BasicVector<T>(d);
    } else {
      throw ConfigError("FedMF supports only the ace plug-in or no enhancement");
    }
    tr.fused = fuse(tr.enhanced, tr.personal_view);
    return tr;
  }

  const auto& V = state.personal_table;
  require_same_shape(C, V, "forward");
  tr.p_personal = row_mean(V, positives);
  switch (spec.enhancement) {
    case EnhancementKind::kNone:
      tr.transfer = BasicMatrix<T>::identity(d);
      tr.enhanced = C;
      tr.personal_view = V;
      tr.p_enhanced = tr.p_global;
      tr.p_view = tr.p_personal;
      break;
    case EnhancementKind::kAce:
      tr.transfer = generate_transfer_matrix(state.net, tr.p_global, tr.p_personal, scale,
                                             &tr.transfer_cache);
      tr.enhanced = enhance_consensus(tr.transfer, C);
      tr.personal_view = V;
      tr.p_enhanced = matvec(tr.transfer, tr.p_global.span());
      tr.p_view = tr.p_personal;
      break;
    case EnhancementKind::kConsensusTransfer:
      tr.enhanced = residual_rows(state.net, C, tr.global_row_caches);
      tr.personal_view = V;
      tr.p_enhanced = row_mean(tr.enhanced, positives);
      tr.p_view = tr.p_personal;
      break;
    case EnhancementKind::kUnifiedTransfer:
      tr.enhanced = residual_rows(state.net, C, tr.global_row_caches);
      tr.personal_view = residual_rows(state.net, V, tr.personal_row_caches);
      tr.p_enhanced = row_mean(tr.enhanced, positives);
      tr.p_view = row_mean(tr.personal_view, positives);
      break;
  }
  tr.fused = fuse(tr.enhanced, tr.personal_view);
  return tr;
}

template <typename T>
ViewGradients<T> ViewGradients<T>::zeros(std::size_t items, std::size_t dim) {
  ViewGradients g;
  g.enhanced = BasicMatrix<T>(items, dim);
  g.personal_view = BasicMatrix<T>(items, dim);
  g.p_enhanced = BasicVector<T>(dim);
  g.p_view = BasicVector<T>(dim);
  return g;
}

namespace {

// Gradients of E = C W^T and p_E = W p_G with W produced by the transfer net
// from input [p_G, second]. Returns the gradient w.r.t. the second input half.
template <typename T>
BasicVector<T> transfer_matrix_backward(const ClientState<T>& state, const ForwardTrace<T>& tr,
                                        const ModelSpec& spec, const ViewGradients<T>& up,
                                        std::span<const int> positives,
                                        ClientGradients<T>& grads) {
  const auto& C = state.global_table;
  const std::size_t d = C.cols();
  const auto& W = tr.transfer;
  // dW = dE^T C + dp_E p_G^T
  BasicMatrix<T> dW = matmul_at(up.enhanced, C);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) dW(a, b) += up.p_enhanced[a] * tr.p_global[b];
  // dC += dE W
  BasicMatrix<T> dC = matmul(up.enhanced, W);
  axpy<T>(T(1), dC.span(), grads.global_table.span());
  // dp_G = W^T dp_E + net input gradient
  BasicVector<T> dpg(d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) dpg[b] += W(a, b) * up.p_enhanced[a];

  const T scale = static_cast<T>(spec.ace_scale);
  std::vector<T> dout(dW.values().begin(), dW.values().end());
  if (scale != T(1))
    for (auto& v : dout) v *= scale;
  std::vector<T> dinput(2 * d, T(0));
  mlp_backward(state.net, tr.transfer_cache, std::span<const T>(dout), grads.net,
               std::span<T>(dinput));
  for (std::size_t k = 0; k < d; ++k) dpg[k] += dinput[k];
  scatter_mean<T>(dpg.span(), positives, grads.global_table);
  BasicVector<T> dsecond(d);
  for (std::size_t k = 0; k < d; ++k) dsecond[k] = dinput[d + k];
  return dsecond;
}

}  // namespace

template <typename T>
void backward(const ClientState<T>& state, const ForwardTrace<T>& tr,
              std::span<const int> positives, const ModelSpec& spec,
              const ViewGradients<T>& up, ClientGradients<T>& grads) {
  if (spec.base == BaseModel::kFedMf) {
    // personal view is C itself; p_view is p_G.
    axpy<T>(T(1), up.personal_view.span(), grads.global_table.span());
    scatter_mean<T>(up.p_view.span(), positives, grads.global_table);
    if (spec.enhancement == EnhancementKind::kAce) {
      BasicVector<T> dsecond = transfer_matrix_backward(state, tr, spec, up, positives, grads);
      scatter_mean<T>(dsecond.span(), positives, grads.global_table);
    }
    return;
  }

  switch (spec.enhancement) {
    case EnhancementKind::kNone:
      axpy<T>(T(1), up.enhanced.span(), grads.global_table.span());
      scatter_mean<T>(up.p_enhanced.span(), positives, grads.global_table);
      axpy<T>(T(1), up.personal_view.span(), grads.personal_table.span());
      scatter_mean<T>(up.p_view.span(), positives, grads.personal_table);
      break;
    case EnhancementKind::kAce: {
      BasicVector<T> dpp = transfer_matrix_backward(state, tr, spec, up, positives, grads);
      axpy<T>(T(1), up.p_view.span(), dpp.span());
      axpy<T>(T(1), up.personal_view.span(), grads.personal_table.span());
      scatter_mean<T>(dpp.span(), positives, grads.personal_table);
      break;
    }
    case EnhancementKind::kConsensusTransfer: {
      BasicMatrix<T> dE = up.enhanced;
      scatter_mean<T>(up.p_enhanced.span(), positives, dE);
      residual_rows_backward(state.net, tr.global_row_caches, dE, grads.global_table, grads.net);
      axpy<T>(T(1), up.personal_view.span(), grads.personal_table.span());
      scatter_mean<T>(up.p_view.span(), positives, grads.personal_table);
      break;
    }
    case EnhancementKind::kUnifiedTransfer: {
      BasicMatrix<T> dE = up.enhanced;
      scatter_mean<T>(up.p_enhanced.span(), positives, dE);
      residual_rows_backward(state.net, tr.global_row_caches, dE, grads.global_table, grads.net);
      BasicMatrix<T> dP = up.personal_view;
      scatter_mean<T>(up.p_view.span(), positives, dP);
      residual_rows_backward(state.net, tr.personal_row_caches, dP, grads.personal_table,
                             grads.net);
      break;
    }
  }
}

#define FED3CR_INSTANTIATE_MODEL(T)                                                      \
  template struct TransferNet<T>;                                                       \
  template TransferNet<T> make_transfer_net<T>(const std::vector<int>&, int);          \
  template BasicVector<T> mlp_forward<T>(const TransferNet<T>&, std::span<const T>,     \
                                         MlpCache<T>*);                                 \
  template void mlp_backward<T>(const TransferNet<T>&, const MlpCache<T>&,              \
                                std::span<const T>, TransferNet<T>&, std::span<T>);     \
  template struct ClientGradients<T>;                                                   \
  template struct ViewGradients<T>;                                                     \
  template ClientState<T> init_client<T>(std::uint64_t, int, const ModelSpec&);         \
  template void init_transfer_net<T>(TransferNet<T>&, std::mt19937_64&,                 \
                                     const ModelSpec&);                                 \
  template BasicMatrix<T> random_table<T>(std::mt19937_64&, std::size_t, std::size_t); \
  template BasicVector<T> row_mean<T>(const BasicMatrix<T>&, std::span<const int>);     \
  template std::pair<BasicVector<T>, BasicVector<T>> compute_prototypes<T>(             \
      const BasicMatrix<T>&, const BasicMatrix<T>&, std::span<const int>);              \
  template BasicMatrix<T> generate_transfer_matrix<T>(                                  \
      const TransferNet<T>&, const BasicVector<T>&, const BasicVector<T>&, T,           \
      MlpCache<T>*);                                                                    \
  template BasicMatrix<T> enhance_consensus<T>(const BasicMatrix<T>&,                   \
                                               const BasicMatrix<T>&);                  \
  template BasicMatrix<T> fuse<T>(const BasicMatrix<T>&, const BasicMatrix<T>&);        \
  template T predict<T>(std::span<const T>, std::span<const T>);                        \
  template ForwardTrace<T> forward<T>(const ClientState<T>&, std::span<const int>,      \
                                      const ModelSpec&);                                \
  template void backward<T>(const ClientState<T>&, const ForwardTrace<T>&,              \
                            std::span<const int>, const ModelSpec&,                     \
                            const ViewGradients<T>&, ClientGradients<T>&);

FED3CR_INSTANTIATE_MODEL(float)
FED3CR_INSTANTIATE_MODEL(double)

#undef FED3CR_INSTANTIATE_MODEL

}  // namespace fed3cr
