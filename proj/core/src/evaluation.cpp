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

#include "fed3cr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "fed3cr/errors.hpp"

namespace fed3cr {

template <typename T>
std::vector<int> rank_candidates(std::span<const T> user, const BasicMatrix<T>& table,
                                 std::span<const int> candidates) {
  std::vector<std::pair<T, int>> scored;
  scored.reserve(candidates.size());
  for (int j : candidates) scored.emplace_back(dot(user, table.row(j)), j);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out;
  out.reserve(scored.size());
  for (const auto& [score, j] : scored) out.push_back(j);
  return out;
}

HitNdcg hr_ndcg_at_k(std::span<const int> ranked, int test_item, int k) {
  auto it = std::find(ranked.begin(), ranked.end(), test_item);
  if (it == ranked.end()) {
    throw ProtocolError("test item " + std::to_string(test_item) + " not in ranked list");
  }
  const long rank = std::distance(ranked.begin(), it) + 1;
  if (rank > k) return {};
  return {1.0, 1.0 / std::log2(static_cast<double>(rank) + 1.0)};
}

double rbo_truncated(std::span<const int> list_a, std::span<const int> list_b, double p) {
  if (list_a.size() != list_b.size()) {
    throw ShapeError("rbo_truncated: lists have different lengths");
  }
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("rbo_truncated: p must lie in (0, 1)");
  const std::size_t depth = list_a.size();
  if (depth == 0) return 1.0;
  std::unordered_set<int> seen_a, seen_b;
  std::size_t overlap = 0;
  double weighted = 0.0, weights = 0.0, pk = 1.0;
  for (std::size_t k = 0; k < depth; ++k) {
    const int a = list_a[k], b = list_b[k];
    if (!seen_a.insert(a).second || !seen_b.insert(b).second) {
      throw ProtocolError("rbo_truncated: duplicate item in ranked list");
    }
    if (a == b) {
      ++overlap;
    } else {
      if (seen_b.count(a)) ++overlap;
      if (seen_a.count(b)) ++overlap;
    }
    weighted += pk * static_cast<double>(overlap) / static_cast<double>(k + 1);
    weights += pk;
    pk *= p;
  }
  return weighted / weights;
}

template <typename T>
double view_consistency_rbo(const ClientState<T>& state, const ForwardTrace<T>& trace,
                            int k_prime, double p) {
  const std::size_t m = trace.enhanced.rows();
  std::vector<int> all(m);
  std::iota(all.begin(), all.end(), 0);
  const auto user = state.user.span();
  auto personal = rank_candidates<T>(user, trace.personal_view, all);
  auto global = rank_candidates<T>(user, trace.enhanced, all);
  const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(k_prime), m);
  personal.resize(depth);
  global.resize(depth);
  return rbo_truncated(personal, global, p);
}

template <typename T>
Matrix correlation_matrix(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal,
                          double clip) {
  require_same_shape(enhanced, personal, "correlation_matrix");
  const BasicMatrix<T> e = matmul_at(enhanced, personal);
  Matrix out(e.rows(), e.cols());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double v = static_cast<double>(e.data()[i]);
    out.data()[i] = std::abs(v) <= clip ? 0.0 : v;
  }
  return out;
}

std::size_t count_above(const Matrix& m, double threshold) {
  return static_cast<std::size_t>(std::count_if(
      m.span().begin(), m.span().end(), [&](double v) { return std::abs(v) > threshold; }));
}

void write_correlation_csv(const Matrix& m, std::ostream& out) {
  char buf[64];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.6g", m(i, j));
      if (j > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

template <typename T>
Matrix export_correlation_matrix(const BasicMatrix<T>& enhanced,
                                 const BasicMatrix<T>& personal, double clip,
                                 const std::filesystem::path& path) {
  Matrix e = correlation_matrix(enhanced, personal, clip);
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  write_correlation_csv(e, out);
  return e;
}

std::string metrics_csv_header() {
  return "round,hr10,ndcg10,rbo50,loss_rec,loss_a,loss_o,clients_evaluated";
}

std::string metrics_csv_row(const RoundMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,", m.round, m.hr_at_k, m.ndcg_at_k);
  std::string row = buf;
  if (m.has_rbo) {
    std::snprintf(buf, sizeof(buf), "%.6f", m.rbo);
    row += buf;
  }
  std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f,%d", m.loss_rec, m.loss_a, m.loss_o,
                m.clients_evaluated);
  row += buf;
  return row;
}

void write_metrics_csv(std::span<const RoundMetrics> rows, std::ostream& out) {
  out << metrics_csv_header() << '\n';
  for (const auto& r : rows) out << metrics_csv_row(r) << '\n';
}

#define FED3CR_INSTANTIATE_EVAL(T)                                                       \
  template std::vector<int> rank_candidates<T>(std::span<const T>, const BasicMatrix<T>&, \
                                               std::span<const int>);                     \
  template double view_consistency_rbo<T>(const ClientState<T>&, const ForwardTrace<T>&,  \
                                          int, double);                                   \
  template Matrix correlation_matrix<T>(const BasicMatrix<T>&, const BasicMatrix<T>&,     \
                                        double);                                          \
  template Matrix export_correlation_matrix<T>(const BasicMatrix<T>&,                     \
                                               const BasicMatrix<T>&, double,             \
                                               const std::filesystem::path&);

FED3CR_INSTANTIATE_EVAL(float)
FED3CR_INSTANTIATE_EVAL(double)

#undef FED3CR_INSTANTIATE_EVAL

}  // namespace fed3cr
