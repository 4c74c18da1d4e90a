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

#include <span>
#include <string>
#include <vector>

#include "fed3cr/datasets.hpp"
#include "fed3cr/errors.hpp"
#include "fed3cr/model.hpp"
#include "fed3cr/numerics.hpp"

namespace fed3cr {

inline constexpr double kPredictionClamp = 1e-7;
inline constexpr double kLogFloor = 1e-12;
inline constexpr double kRatioFloor = 1e-6;

// How prototype/row cosine similarities become a top-one distribution.
enum class TopOneMode {
  kSoftmax,       // softmax over cosines
  kLiteralRatio,  // cosines clamped to [1e-6, 1], divided by their sum
};

TopOneMode parse_top_one_mode(const std::string& name);
std::string to_string(TopOneMode mode);

enum class ComplementarityKind {
  kOrthogonal,  // (1/d) ||C_E^T V||_F^2
  kL2Distance,  // -(1/d) ||C_E - V||_F^2, pushes the views apart
};

ComplementarityKind parse_complementarity_kind(const std::string& name);
std::string to_string(ComplementarityKind kind);

struct LossBreakdown {
  double l_rec = 0.0;
  double l_a = 0.0;
  double l_o = 0.0;
  double total = 0.0;
  double beta_a = 0.0;  // effective weights (0 when a term is disabled)
  double beta_o = 0.0;
};

struct LossConfig {
  double beta_a = 0.0;
  double beta_o = 0.0;
  bool consistency_enabled = true;
  bool complementarity_enabled = true;
  ComplementarityKind complementarity = ComplementarityKind::kOrthogonal;
  TopOneMode top_one_mode = TopOneMode::kSoftmax;
  // Restrict the top-one distributions to the batch's items.
  bool consistency_sample = false;

  double effective_beta_a() const { return consistency_enabled ? beta_a : 0.0; }
  double effective_beta_o() const { return complementarity_enabled ? beta_o : 0.0; }
};

// Summed binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
template <typename T>
T rec_loss(std::span<const T> predictions, std::span<const float> labels);

template <typename T>
struct TopOneCache {
  std::vector<int> rows;        // table rows covered, in order
  BasicVector<T> cosines;
  BasicVector<T> distribution;
  std::vector<T> row_norms;
  T prototype_norm = T(0);
};

// Distribution over table rows (all rows, or `rows` when non-empty) derived
// from cosine similarity to the prototype. Sums to 1. A zero prototype or
// zero rows produce a warning; an entirely degenerate input is uniform.
template <typename T>
BasicVector<T> top_one_distribution(const BasicVector<T>& prototype,
                                    const BasicMatrix<T>& table, TopOneMode mode,
                                    Warnings* warnings = nullptr,
                                    std::span<const int> rows = {},
                                    TopOneCache<T>* cache = nullptr);

// Accumulates d(loss)/d(prototype) and d(loss)/d(table) given
// d(loss)/d(distribution).
template <typename T>
void top_one_backward(const BasicVector<T>& prototype, const BasicMatrix<T>& table,
                      TopOneMode mode, const TopOneCache<T>& cache,
                      const BasicVector<T>& ddist, BasicVector<T>& dprototype,
                      BasicMatrix<T>& dtable);

// -1/2 sum P_p log P_g - 1/2 sum P_g log P_p, logs floored at 1e-12.
template <typename T>
T consistency_loss(const BasicVector<T>& p_personal, const BasicVector<T>& p_global);

template <typename T>
void consistency_loss_grad(const BasicVector<T>& p_personal, const BasicVector<T>& p_global,
                           BasicVector<T>& d_personal, BasicVector<T>& d_global);

// (1/d) sum_ij E_ij^2 with E = C_E^T V.
template <typename T>
T orthogonality_loss(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal);

// Accumulates weight * gradient into denhanced / dpersonal.
template <typename T>
void orthogonality_loss_grad(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal,
                             T weight, BasicMatrix<T>& denhanced, BasicMatrix<T>& dpersonal);

// -(1/d) ||C_E - V||_F^2.
template <typename T>
T l2_distance_loss(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal);

template <typename T>
void l2_distance_loss_grad(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal,
                           T weight, BasicMatrix<T>& denhanced, BasicMatrix<T>& dpersonal);

// Frobenius distance between the row-cosine Gram matrices of the two tables.
// Diagnostic only.
template <typename T>
double similarity_consistency_diagnostic(const BasicMatrix<T>& enhanced,
                                         const BasicMatrix<T>& personal,
                                         Warnings* warnings = nullptr);

// Evaluates the full objective on a fresh trace. When grads is non-null the
// gradient w.r.t. every client parameter block is accumulated into it.
template <typename T>
LossBreakdown total_loss(const ClientState<T>& state, const ForwardTrace<T>& trace,
                         const TrainingBatch& batch, std::span<const int> positives,
                         const ModelSpec& spec, const LossConfig& config,
                         ClientGradients<T>* grads = nullptr,
                         Warnings* warnings = nullptr);

}  // namespace fed3cr
