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
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fed3cr/numerics.hpp"

namespace fed3cr {

enum class AceInit { kZero, kIdentity };

// How the client turns the downloaded consensus into its global view.
enum class EnhancementKind {
  kNone,               // global view is the consensus itself
  kAce,                // prototype-conditioned transfer matrix
  kConsensusTransfer,  // per-row residual MLP over consensus rows
  kUnifiedTransfer,    // one residual MLP applied to both tables' rows
};

// kDual keeps a consensus table and a personal table per client. kFedMf keeps
// only the shared table; with ACE enabled the transfer is applied residually
// on top of it.
enum class BaseModel { kDual, kFedMf };

AceInit parse_ace_init(const std::string& name);
std::string to_string(AceInit v);
EnhancementKind parse_enhancement_kind(const std::string& name);
std::string to_string(EnhancementKind v);
BaseModel parse_base_model(const std::string& name);
std::string to_string(BaseModel v);

// Fully connected network. widths[0] is the input width; each following
// width is a ReLU hidden layer output; the last layer is linear and maps
// widths.back() to output_dim.
template <typename T>
struct TransferNet {
  std::vector<int> widths;
  int output_dim = 0;
  std::vector<BasicMatrix<T>> weights;  // layer l: fan_out x fan_in
  std::vector<BasicVector<T>> biases;

  int input_dim() const { return widths.empty() ? 0 : widths.front(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;
  bool same_schedule(const TransferNet& other) const {
    return widths == other.widths && output_dim == other.output_dim;
  }

  std::vector<T> flatten() const;
  void assign_flat(std::span<const T> flat);
  void fill(T v);
  // this += s * other; schedules must match.
  void add_scaled(T s, const TransferNet& other);

  bool operator==(const TransferNet&) const = default;
};

// Zero-valued network with the given schedule.
template <typename T>
TransferNet<T> make_transfer_net(const std::vector<int>& widths, int output_dim);

template <typename T>
struct MlpCache {
  std::vector<BasicVector<T>> layer_inputs;  // input fed to each layer
  std::vector<BasicVector<T>> pre_activations;
};

template <typename T>
BasicVector<T> mlp_forward(const TransferNet<T>& net, std::span<const T> input,
                           MlpCache<T>* cache = nullptr);

// Accumulates parameter gradients into grad and, when dinput is non-empty, the
// input gradient into dinput.
template <typename T>
void mlp_backward(const TransferNet<T>& net, const MlpCache<T>& cache,
                  std::span<const T> dout, TransferNet<T>& grad,
                  std::span<T> dinput);

struct ModelSpec {
  int dim = 32;
  int num_items = 0;
  // Layer widths in units of dim, input first. {2, 4} is [2d, 4d] for ACE.
  std::vector<int> layer_multipliers{2, 4};
  EnhancementKind enhancement = EnhancementKind::kAce;
  BaseModel base = BaseModel::kDual;
  AceInit ace_init = AceInit::kZero;
  double ace_scale = 1.0;

  bool uses_transfer_matrix() const {
    return enhancement == EnhancementKind::kAce;
  }
  bool has_personal_table() const { return base == BaseModel::kDual; }
};

// Network schedule implied by spec: ACE nets map 2d -> d*d; row-wise
// transfer nets map d -> d.
std::pair<std::vector<int>, int> transfer_net_shape(const ModelSpec& spec);

template <typename T>
struct ClientState {
  int client_id = 0;
  BasicVector<T> user;           // u_i
  BasicMatrix<T> global_table;   // C_i, M x d
  BasicMatrix<T> personal_table; // V_i, M x d (0 x d for FedMF)
  TransferNet<T> net;            // theta_i
  long long iterations = 0;      // local SGD steps taken, drives the LR decay

  bool operator==(const ClientState&) const = default;
};

// Parameter gradients with the same layout as ClientState.
template <typename T>
struct ClientGradients {
  BasicVector<T> user;
  BasicMatrix<T> global_table;
  BasicMatrix<T> personal_table;
  TransferNet<T> net;

  static ClientGradients zeros_like(const ClientState<T>& s);
};

// Embeddings ~ Normal(0, 0.01) from a stream keyed by (seed, client_id).
// Hidden weights use U(-1/sqrt(fan_in), 1/sqrt(fan_in)) and every bias starts
// at zero, so a row-wise net adds no shared offset to all rows. The final
// layer weights are U(-1e-3, 1e-3); with kIdentity (ACE only) the final bias
// encodes I / ace_scale.
template <typename T>
ClientState<T> init_client(std::uint64_t seed, int client_id, const ModelSpec& spec);

// Initializes every layer of net in place (schedule already set) using the
// rules described for init_client.
template <typename T>
void init_transfer_net(TransferNet<T>& net, std::mt19937_64& rng,
                       const ModelSpec& spec);

// M x d table with Normal(0, 0.01) entries.
template <typename T>
BasicMatrix<T> random_table(std::mt19937_64& rng, std::size_t rows, std::size_t cols);

// Means of C_i and V_i rows over positives. Throws DataError when empty.
template <typename T>
std::pair<BasicVector<T>, BasicVector<T>> compute_prototypes(
    const BasicMatrix<T>& global_table, const BasicMatrix<T>& personal_table,
    std::span<const int> positives);

template <typename T>
BasicVector<T> row_mean(const BasicMatrix<T>& table, std::span<const int> rows);

// W = scale * reshape(net([p_global, p_personal]), d, d), row-major.
template <typename T>
BasicMatrix<T> generate_transfer_matrix(const TransferNet<T>& net,
                                        const BasicVector<T>& p_global,
                                        const BasicVector<T>& p_personal,
                                        T scale = T(1),
                                        MlpCache<T>* cache = nullptr);

// C W^T: every item row c_j becomes W c_j.
template <typename T>
BasicMatrix<T> enhance_consensus(const BasicMatrix<T>& transfer,
                                 const BasicMatrix<T>& consensus);

template <typename T>
BasicMatrix<T> fuse(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal);

// sigma(u . v).
template <typename T>
T predict(std::span<const T> user, std::span<const T> item);

// Intermediates of one client forward pass.
template <typename T>
struct ForwardTrace {
  BasicVector<T> p_global;    // p_G, mean consensus rows over positives
  BasicVector<T> p_personal;  // p_P, mean personal rows over positives
  BasicMatrix<T> transfer;    // W (identity when no transfer matrix is used)
  BasicMatrix<T> enhanced;    // C_E, the global view
  BasicMatrix<T> personal_view;  // V_i, or its transferred rows (unified)
  BasicVector<T> p_enhanced;  // p_E = W p_G (mean global-view row in general)
  BasicVector<T> p_view;      // mean personal-view row over positives
  BasicMatrix<T> fused;       // V_F

  // Backward caches.
  MlpCache<T> transfer_cache;
  std::vector<MlpCache<T>> global_row_caches;
  std::vector<MlpCache<T>> personal_row_caches;
};

template <typename T>
ForwardTrace<T> forward(const ClientState<T>& state, std::span<const int> positives,
                        const ModelSpec& spec);

// Upstream gradients with respect to the two views and their prototypes.
// Gradients w.r.t. V_F must already be folded into both tables.
template <typename T>
struct ViewGradients {
  BasicMatrix<T> enhanced;
  BasicMatrix<T> personal_view;
  BasicVector<T> p_enhanced;
  BasicVector<T> p_view;

  static ViewGradients zeros(std::size_t items, std::size_t dim);
};

// Back-propagates view gradients into global_table, personal_table and net of
// grads (accumulating).
template <typename T>
void backward(const ClientState<T>& state, const ForwardTrace<T>& trace,
              std::span<const int> positives, const ModelSpec& spec,
              const ViewGradients<T>& upstream, ClientGradients<T>& grads);

}  // namespace fed3cr
