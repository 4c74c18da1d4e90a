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

#include "fed3cr/losses.hpp"

#include <algorithm>
#include <cmath>

namespace fed3cr {

TopOneMode parse_top_one_mode(const std::string& name) {
  if (name == "softmax") return TopOneMode::kSoftmax;
  if (name == "literal-ratio") return TopOneMode::kLiteralRatio;
  throw ConfigError("unknown top_one_mode '" + name + "' (expected softmax or literal-ratio)");
}

std::string to_string(TopOneMode mode) {
  return mode == TopOneMode::kSoftmax ? "softmax" : "literal-ratio";
}

ComplementarityKind parse_complementarity_kind(const std::string& name) {
  if (name == "orthogonal") return ComplementarityKind::kOrthogonal;
  if (name == "l2-distance") return ComplementarityKind::kL2Distance;
  throw ConfigError("unknown complementarity_kind '" + name +
                    "' (expected orthogonal or l2-distance)");
}

std::string to_string(ComplementarityKind kind) {
  return kind == ComplementarityKind::kOrthogonal ? "orthogonal" : "l2-distance";
}

template <typename T>
T rec_loss(std::span<const T> predictions, std::span<const float> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("rec_loss: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const T lo = static_cast<T>(kPredictionClamp);
  const T hi = T(1) - lo;
  T total = T(0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const T p = std::clamp(predictions[i], lo, hi);
    const T r = static_cast<T>(labels[i]);
    total -= r * std::log(p) + (T(1) - r) * std::log(T(1) - p);
  }
  return total;
}

template <typename T>
BasicVector<T> top_one_distribution(const BasicVector<T>& prototype,
                                    const BasicMatrix<T>& table, TopOneMode mode,
                                    Warnings* warnings, std::span<const int> rows,
                                    TopOneCache<T>* cache) {
  if (prototype.dim() != table.cols()) {
    throw ShapeError("top_one_distribution: prototype dim != table cols");
  }
  TopOneCache<T> local;
  TopOneCache<T>& c = cache != nullptr ? *cache : local;
  c.rows.clear();
  if (rows.empty()) {
    c.rows.resize(table.rows());
    for (std::size_t j = 0; j < table.rows(); ++j) c.rows[j] = static_cast<int>(j);
  } else {
    c.rows.assign(rows.begin(), rows.end());
  }
  const std::size_t n = c.rows.size();
  c.prototype_norm = norm2(prototype.span());
  c.row_norms.assign(n, T(0));
  c.cosines = BasicVector<T>(n);
  bool degenerate = !(c.prototype_norm > T(0));
  for (std::size_t k = 0; k < n; ++k) {
    auto row = table.row(c.rows[k]);
    c.row_norms[k] = norm2(row);
    bool deg = false;
    c.cosines[k] = cosine_similarity(prototype.span(), row, &deg);
    degenerate |= deg;
  }
  if (degenerate) {
    warn(warnings, "top_one_distribution: zero-norm prototype or table row");
  }
  if (mode == TopOneMode::kSoftmax) {
    c.distribution = softmax(c.cosines);
  } else {
    c.distribution = BasicVector<T>(n);
    T sum = T(0);
    for (std::size_t k = 0; k < n; ++k) {
      c.distribution[k] = std::clamp(c.cosines[k], static_cast<T>(kRatioFloor), T(1));
      sum += c.distribution[k];
    }
    for (auto& v : c.distribution) v /= sum;
  }
  return c.distribution;
}

template <typename T>
void top_one_backward(const BasicVector<T>& prototype, const BasicMatrix<T>& table,
                      TopOneMode mode, const TopOneCache<T>& cache,
                      const BasicVector<T>& ddist, BasicVector<T>& dprototype,
                      BasicMatrix<T>& dtable) {
  const std::size_t n = cache.rows.size();
  const auto& P = cache.distribution;
  T weighted = T(0);
  for (std::size_t k = 0; k < n; ++k) weighted += P[k] * ddist[k];

  BasicVector<T> dcos(n);
  if (mode == TopOneMode::kSoftmax) {
    for (std::size_t k = 0; k < n; ++k) dcos[k] = P[k] * (ddist[k] - weighted);
  } else {
    T sum = T(0);
    for (std::size_t k = 0; k < n; ++k)
      sum += std::clamp(cache.cosines[k], static_cast<T>(kRatioFloor), T(1));
    for (std::size_t k = 0; k < n; ++k) {
      const T s = cache.cosines[k];
      const bool inside = s > static_cast<T>(kRatioFloor) && s < T(1);
      dcos[k] = inside ? (ddist[k] - weighted) / sum : T(0);
    }
  }

  const T pn = cache.prototype_norm;
  if (!(pn > T(0))) return;
  const std::size_t d = prototype.dim();
  for (std::size_t k = 0; k < n; ++k) {
    const T rn = cache.row_norms[k];
    if (!(rn > T(0)) || dcos[k] == T(0)) continue;
    const T s = cache.cosines[k];
    const T g = dcos[k];
    auto row = table.row(cache.rows[k]);
    auto drow = dtable.row(cache.rows[k]);
    const T inv = T(1) / (pn * rn);
    const T sp = s / (pn * pn);
    const T sr = s / (rn * rn);
    for (std::size_t i = 0; i < d; ++i) {
      dprototype[i] += g * (row[i] * inv - sp * prototype[i]);
      drow[i] += g * (prototype[i] * inv - sr * row[i]);
    }
  }
}

template <typename T>
T consistency_loss(const BasicVector<T>& p_personal, const BasicVector<T>& p_global) {
  if (p_personal.dim() != p_global.dim()) throw ShapeError("consistency_loss: lengths differ");
  const T floor = static_cast<T>(kLogFloor);
  T a = T(0), b = T(0);
  for (std::size_t k = 0; k < p_personal.dim(); ++k) {
    a += p_personal[k] * std::log(std::max(p_global[k], floor));
    b += p_global[k] * std::log(std::max(p_personal[k], floor));
  }
  return -T(0.5) * a - T(0.5) * b;
}

template <typename T>
void consistency_loss_grad(const BasicVector<T>& p_personal, const BasicVector<T>& p_global,
                           BasicVector<T>& d_personal, BasicVector<T>& d_global) {
  const T floor = static_cast<T>(kLogFloor);
  for (std::size_t k = 0; k < p_personal.dim(); ++k) {
    const T pp = p_personal[k];
    const T pg = p_global[k];
    d_personal[k] += -T(0.5) * std::log(std::max(pg, floor)) -
                     (pp > floor ? T(0.5) * pg / pp : T(0));
    d_global[k] += -T(0.5) * std::log(std::max(pp, floor)) -
                   (pg > floor ? T(0.5) * pp / pg : T(0));
  }
}

template <typename T>
T orthogonality_loss(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal) {
  require_same_shape(enhanced, personal, "orthogonality_loss");
  const BasicMatrix<T> corr = matmul_at(enhanced, personal);
  T s = T(0);
  for (T v : corr.span()) s += v * v;
  return s / static_cast<T>(enhanced.cols());
}

template <typename T>
void orthogonality_loss_grad(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal,
                             T weight, BasicMatrix<T>& denhanced, BasicMatrix<T>& dpersonal) {
  require_same_shape(enhanced, personal, "orthogonality_loss_grad");
  const BasicMatrix<T> corr = matmul_at(enhanced, personal);
  const T k = weight * T(2) / static_cast<T>(enhanced.cols());
  // dC_E = k V E^T, dV = k C_E E
  const BasicMatrix<T> de = matmul_bt(personal, corr);
  const BasicMatrix<T> dv = matmul(enhanced, corr);
  axpy<T>(k, de.span(), denhanced.span());
  axpy<T>(k, dv.span(), dpersonal.span());
}

template <typename T>
T l2_distance_loss(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal) {
  require_same_shape(enhanced, personal, "l2_distance_loss");
  T s = T(0);
  for (std::size_t i = 0; i < enhanced.size(); ++i) {
    const T diff = enhanced.data()[i] - personal.data()[i];
    s += diff * diff;
  }
  return -s / static_cast<T>(enhanced.cols());
}

template <typename T>
void l2_distance_loss_grad(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal,
                           T weight, BasicMatrix<T>& denhanced, BasicMatrix<T>& dpersonal) {
  require_same_shape(enhanced, personal, "l2_distance_loss_grad");
  const T k = weight * T(2) / static_cast<T>(enhanced.cols());
  for (std::size_t i = 0; i < enhanced.size(); ++i) {
    const T diff = enhanced.data()[i] - personal.data()[i];
    denhanced.data()[i] -= k * diff;
    dpersonal.data()[i] += k * diff;
  }
}

template <typename T>
double similarity_consistency_diagnostic(const BasicMatrix<T>& enhanced,
                                         const BasicMatrix<T>& personal, Warnings* warnings) {
  require_same_shape(enhanced, personal, "similarity_consistency_diagnostic");
  const std::size_t m = enhanced.rows();
  bool degenerate = false;
  double sum = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      const double ge = cosine_similarity(enhanced.row(a), enhanced.row(b), &degenerate);
      const double gv = cosine_similarity(personal.row(a), personal.row(b), &degenerate);
      sum += (ge - gv) * (ge - gv);
    }
  }
  if (degenerate) warn(warnings, "similarity_consistency_diagnostic: zero-norm rows");
  return std::sqrt(sum);
}

namespace {

std::vector<int> unique_sorted(const std::vector<int>& items) {
  std::vector<int> out = items;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

template <typename T>
LossBreakdown total_loss(const ClientState<T>& state, const ForwardTrace<T>& trace,
                         const TrainingBatch& batch, std::span<const int> positives,
                         const ModelSpec& spec, const LossConfig& config,
                         ClientGradients<T>* grads, Warnings* warnings) {
  LossBreakdown out;
  out.beta_a = config.effective_beta_a();
  out.beta_o = config.effective_beta_o();
  const std::size_t m = trace.fused.rows();
  const std::size_t d = trace.fused.cols();
  const auto user = state.user.span();

  // Recommendation term.
  std::vector<T> preds(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    preds[b] = predict<T>(user, trace.fused.row(batch.items[b]));
  }
  out.l_rec = static_cast<double>(rec_loss<T>(std::span<const T>(preds), batch.labels));

  // Auxiliary terms are always evaluated so disabled ones can still be
  // reported; they only contribute gradient when their weight is active.
  const std::vector<int> rows =
      config.consistency_sample ? unique_sorted(batch.items) : std::vector<int>{};
  TopOneCache<T> personal_cache, global_cache;
  const BasicVector<T> dist_personal = top_one_distribution(
      trace.p_view, trace.personal_view, config.top_one_mode, warnings, rows, &personal_cache);
  const BasicVector<T> dist_global = top_one_distribution(
      trace.p_enhanced, trace.enhanced, config.top_one_mode, warnings, rows, &global_cache);
  out.l_a = static_cast<double>(consistency_loss(dist_personal, dist_global));
  out.l_o = config.complementarity == ComplementarityKind::kOrthogonal
                ? static_cast<double>(orthogonality_loss(trace.enhanced, trace.personal_view))
                : static_cast<double>(l2_distance_loss(trace.enhanced, trace.personal_view));
  out.total = out.l_rec + out.beta_a * out.l_a + out.beta_o * out.l_o;

  if (grads == nullptr) return out;

  auto up = ViewGradients<T>::zeros(m, d);
  const T lo = static_cast<T>(kPredictionClamp);
  const T hi = T(1) - lo;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const T p = preds[b];
    if (p <= lo || p >= hi) continue;  // clamped: flat loss
    const T dz = p - static_cast<T>(batch.labels[b]);
    const int j = batch.items[b];
    auto vrow = trace.fused.row(j);
    axpy<T>(dz, vrow, grads->user.span());
    axpy<T>(dz, user, up.enhanced.row(j));
    axpy<T>(dz, user, up.personal_view.row(j));
  }

  if (out.beta_a > 0.0) {
    const T beta = static_cast<T>(out.beta_a);
    BasicVector<T> d_personal(dist_personal.dim()), d_global(dist_global.dim());
    consistency_loss_grad(dist_personal, dist_global, d_personal, d_global);
    for (auto& v : d_personal) v *= beta;
    for (auto& v : d_global) v *= beta;
    top_one_backward(trace.p_view, trace.personal_view, config.top_one_mode, personal_cache,
                     d_personal, up.p_view, up.personal_view);
    top_one_backward(trace.p_enhanced, trace.enhanced, config.top_one_mode, global_cache,
                     d_global, up.p_enhanced, up.enhanced);
  }
  if (out.beta_o > 0.0) {
    const T beta = static_cast<T>(out.beta_o);
    if (config.complementarity == ComplementarityKind::kOrthogonal) {
      orthogonality_loss_grad(trace.enhanced, trace.personal_view, beta, up.enhanced,
                              up.personal_view);
    } else {
      l2_distance_loss_grad(trace.enhanced, trace.personal_view, beta, up.enhanced,
                            up.personal_view);
    }
  }
  backward(state, trace, positives, spec, up, *grads);
  return out;
}

#define FED3CR_INSTANTIATE_LOSSES(T)                                                        \
  template T rec_loss<T>(std::span<const T>, std::span<const float>);                      \
  template BasicVector<T> top_one_distribution<T>(const BasicVector<T>&,                    \
                                                  const BasicMatrix<T>&, TopOneMode,        \
                                                  Warnings*, std::span<const int>,          \
                                                  TopOneCache<T>*);                         \
  template void top_one_backward<T>(const BasicVector<T>&, const BasicMatrix<T>&,           \
                                    TopOneMode, const TopOneCache<T>&,                      \
                                    const BasicVector<T>&, BasicVector<T>&,                 \
                                    BasicMatrix<T>&);                                       \
  template T consistency_loss<T>(const BasicVector<T>&, const BasicVector<T>&);             \
  template void consistency_loss_grad<T>(const BasicVector<T>&, const BasicVector<T>&,      \
                                         BasicVector<T>&, BasicVector<T>&);                 \
  template T orthogonality_loss<T>(const BasicMatrix<T>&, const BasicMatrix<T>&);           \
  template void orthogonality_loss_grad<T>(const BasicMatrix<T>&, const BasicMatrix<T>&, T, \
                                           BasicMatrix<T>&, BasicMatrix<T>&);               \
  template T l2_distance_loss<T>(const BasicMatrix<T>&, const BasicMatrix<T>&);             \
  template void l2_distance_loss_grad<T>(const BasicMatrix<T>&, const BasicMatrix<T>&, T,   \
                                         BasicMatrix<T>&, BasicMatrix<T>&);                 \
  template double similarity_consistency_diagnostic<T>(const BasicMatrix<T>&,               \
                                                       const BasicMatrix<T>&, Warnings*);   \
  template LossBreakdown total_loss<T>(const ClientState<T>&, const ForwardTrace<T>&,       \
                                       const TrainingBatch&, std::span<const int>,          \
                                       const ModelSpec&, const LossConfig&,                 \
                                       ClientGradients<T>*, Warnings*);

FED3CR_INSTANTIATE_LOSSES(float)
FED3CR_INSTANTIATE_LOSSES(double)

#undef FED3CR_INSTANTIATE_LOSSES

}  // namespace fed3cr
