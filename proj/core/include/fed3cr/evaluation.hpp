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
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fed3cr/model.hpp"
#include "fed3cr/numerics.hpp"

namespace fed3cr {

struct RoundMetrics {
  int round = 0;
  double hr_at_k = 0.0;
  double ndcg_at_k = 0.0;
  double rbo = 0.0;
  bool has_rbo = false;
  double loss_rec = 0.0;
  double loss_a = 0.0;
  double loss_o = 0.0;
  int clients_evaluated = 0;
  int clients_trained = 0;
  double wall_seconds = 0.0;  // not part of the CSV
};

// Candidates sorted by descending u . v_j; equal scores go to the smaller id.
template <typename T>
std::vector<int> rank_candidates(std::span<const T> user, const BasicMatrix<T>& table,
                                 std::span<const int> candidates);

struct HitNdcg {
  double hr = 0.0;
  double ndcg = 0.0;
};

// hr = 1 iff the 1-based rank of test_item is <= k; ndcg = 1/log2(rank + 1)
// on a hit. Throws ProtocolError when test_item is not in ranked.
HitNdcg hr_ndcg_at_k(std::span<const int> ranked, int test_item, int k);

// Prefix-normalized truncated rank-biased overlap of two equal-length lists.
// Throws ProtocolError on duplicates, ShapeError on unequal lengths and
// ConfigError when p is outside (0, 1).
double rbo_truncated(std::span<const int> list_a, std::span<const int> list_b, double p);

// Top-k_prime items scored by u . v over the personal view and by u . c_E
// over the enhanced view, compared with rbo_truncated.
template <typename T>
double view_consistency_rbo(const ClientState<T>& state, const ForwardTrace<T>& trace,
                            int k_prime, double p);

// E = C_E^T V with |E_ij| <= clip zeroed.
template <typename T>
Matrix correlation_matrix(const BasicMatrix<T>& enhanced, const BasicMatrix<T>& personal,
                          double clip);

std::size_t count_above(const Matrix& m, double threshold);

// Plain d x d CSV, 6 significant digits.
void write_correlation_csv(const Matrix& m, std::ostream& out);

template <typename T>
Matrix export_correlation_matrix(const BasicMatrix<T>& enhanced,
                                 const BasicMatrix<T>& personal, double clip,
                                 const std::filesystem::path& path);

// Header and rows of the per-round metrics CSV.
std::string metrics_csv_header();
std::string metrics_csv_row(const RoundMetrics& m);
void write_metrics_csv(std::span<const RoundMetrics> rows, std::ostream& out);

}  // namespace fed3cr
