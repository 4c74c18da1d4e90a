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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fed3cr/evaluation.hpp"
#include "fed3cr/random.hpp"
#include "support/fixtures.hpp"

using namespace fed3cr;

namespace {

Matrix random_matrix(std::uint64_t seed, std::size_t r, std::size_t c) {
  auto rng = make_stream(seed, {0xE7A});
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (auto& v : m.span()) v = n(rng);
  return m;
}

// Depth-by-depth agreement sum.
double rbo_oracle(const std::vector<int>& a, const std::vector<int>& b, double p) {
  std::set<int> sa, sb;
  double num = 0.0, den = 0.0, w = 1.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sa.insert(a[k]);
    sb.insert(b[k]);
    std::size_t common = 0;
    for (int x : sa) common += sb.count(x);
    num += w * static_cast<double>(common) / static_cast<double>(k + 1);
    den += w;
    w *= p;
  }
  return num / den;
}

std::vector<int> naive_rank(const Vector& u, const Matrix& t, const std::vector<int>& cand) {
  std::vector<std::pair<double, int>> scored;
  for (int j : cand) {
    double s = 0.0;
    for (std::size_t k = 0; k < t.cols(); ++k) s += u[k] * t(static_cast<std::size_t>(j), k);
    scored.emplace_back(-s, j);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<int> out;
  for (const auto& [s, j] : scored) out.push_back(j);
  return out;
}

std::vector<int> iota_list(int n, int start = 0) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), start);
  return v;
}

}  // namespace

TEST_CASE("rank_candidates: singleton, tie rule, sort oracle") {
  const Matrix t{{1, 0}, {0, 1}, {2, 2}, {0.5, 0}, {0, 0}, {2, 2}};
  const Vector u{1, 1};
  CHECK(rank_candidates<double>(u.span(), t, std::vector<int>{3}) == std::vector<int>{3});
  CHECK(rank_candidates<double>(u.span(), t, std::vector<int>{5, 2}) == std::vector<int>{2, 5});

  const Matrix big = random_matrix(1, 300, 6);
  const Vector ub(random_matrix(2, 1, 6).values());
  auto rng = make_stream(3, {});
  std::vector<int> cand;
  for (auto i : sample_without_replacement(rng, 300, 100)) cand.push_back(static_cast<int>(i));
  CHECK(rank_candidates<double>(ub.span(), big, cand) == naive_rank(ub, big, cand));
}

TEST_CASE("rank_candidates is invariant under positive rescaling of u") {
  const Matrix big = random_matrix(4, 120, 5);
  const Vector u(random_matrix(5, 1, 5).values());
  const auto cand = iota_list(120);
  const auto base = rank_candidates<double>(u.span(), big, cand);
  for (double s : {1e-3, 0.5, 7.0, 1e4}) {
    Vector su = u;
    for (auto& v : su) v *= s;
    CHECK(rank_candidates<double>(su.span(), big, cand) == base);
  }
}

TEST_CASE("hr_ndcg_at_k anchors") {
  const auto ranked = iota_list(20, 100);
  auto r1 = hr_ndcg_at_k(ranked, 100, 10);
  CHECK(r1.hr == 1.0);
  CHECK(r1.ndcg == 1.0);
  auto r10 = hr_ndcg_at_k(ranked, 109, 10);
  CHECK(r10.hr == 1.0);
  CHECK(r10.ndcg == doctest::Approx(1.0 / std::log2(11.0)));
  CHECK(std::abs(r10.ndcg - 0.2891) < 1e-4);
  auto r11 = hr_ndcg_at_k(ranked, 110, 10);
  CHECK(r11.hr == 0.0);
  CHECK(r11.ndcg == 0.0);
  CHECK_THROWS_AS(hr_ndcg_at_k(ranked, 7, 10), ProtocolError);
}

TEST_CASE("ndcg never exceeds hr") {
  const auto ranked = iota_list(100);
  for (int k : {1, 5, 10, 50})
    for (int t = 0; t < 100; ++t) {
      const auto r = hr_ndcg_at_k(ranked, t, k);
      CHECK(r.ndcg <= r.hr);
      CHECK(r.ndcg >= 0.0);
    }
}

TEST_CASE("rbo_truncated anchors") {
  const std::vector<int> a{1, 2, 3}, b{1, 3, 2}, c{4, 5, 6};
  CHECK(rbo_truncated(a, a, 0.99) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rbo_truncated(a, c, 0.99) == 0.0);
  const double hand = (1.0 * 1.0 + 0.5 * 0.5 + 0.25 * 1.0) / 1.75;
  CHECK(rbo_truncated(a, b, 0.5) == doctest::Approx(hand).epsilon(1e-14));
  CHECK(std::abs(rbo_truncated(a, b, 0.5) - 0.8571) < 1e-4);

  CHECK_THROWS_AS(rbo_truncated(std::vector<int>{1, 1, 2}, a, 0.5), ProtocolError);
  CHECK_THROWS_AS(rbo_truncated(a, std::vector<int>{1, 2}, 0.5), ShapeError);
  CHECK_THROWS_AS(rbo_truncated(a, b, 1.0), ConfigError);
  CHECK_THROWS_AS(rbo_truncated(a, b, 0.0), ConfigError);
}

TEST_CASE("rbo_truncated: oracle, symmetry, range, monotone agreement") {
  auto rng = make_stream(6, {});
  for (int t = 0; t < 100; ++t) {
    std::vector<int> pool = iota_list(40);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<int> a(pool.begin(), pool.begin() + 15);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<int> b(pool.begin(), pool.begin() + 15);
    const double p = std::uniform_real_distribution<double>(0.05, 0.99)(rng);
    const double v = rbo_truncated(a, b, p);
    CHECK(v == doctest::Approx(rbo_oracle(a, b, p)).epsilon(1e-12));
    CHECK(v == rbo_truncated(b, a, p));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);

    // Copy a's prefix into b one position at a time.
    double prev = v;
    std::vector<int> c = b;
    for (std::size_t pos = 0; pos < a.size(); ++pos) {
      const auto it = std::find(c.begin(), c.end(), a[pos]);
      if (it != c.end())
        std::iter_swap(it, c.begin() + static_cast<long>(pos));
      else
        c[pos] = a[pos];
      const double next = rbo_truncated(a, c, p);
      CHECK(next >= prev - 1e-12);
      prev = next;
    }
    CHECK(prev == doctest::Approx(1.0));
  }
}

TEST_CASE("view_consistency_rbo: identical, reversed, pipeline oracle") {
  ClientState<double> state;
  state.user = Vector{1.0};
  ForwardTrace<double> trace;

  const int m = 10;
  trace.enhanced = Matrix(m, 1);
  trace.personal_view = Matrix(m, 1);
  for (int j = 0; j < m; ++j) trace.enhanced(j, 0) = trace.personal_view(j, 0) = j;
  CHECK(view_consistency_rbo(state, trace, m, 0.99) == doctest::Approx(1.0));

  // Reversed scores over exactly K' items: only the deep prefixes overlap.
  for (int j = 0; j < m; ++j) trace.personal_view(j, 0) = -j;
  const double reversed = view_consistency_rbo(state, trace, m, 0.99);
  const auto asc = iota_list(m);
  std::vector<int> desc(asc.rbegin(), asc.rend());
  CHECK(reversed == doctest::Approx(rbo_oracle(desc, asc, 0.99)).epsilon(1e-12));
  CHECK(reversed < 0.4);

  // Reversed over twice as many items: the top-K' lists are disjoint.
  trace.enhanced = Matrix(2 * m, 1);
  trace.personal_view = Matrix(2 * m, 1);
  for (int j = 0; j < 2 * m; ++j) {
    trace.enhanced(j, 0) = j;
    trace.personal_view(j, 0) = -j;
  }
  CHECK(view_consistency_rbo(state, trace, m, 0.99) == 0.0);

  state.user = Vector(random_matrix(7, 1, 4).values());
  trace.enhanced = random_matrix(8, 60, 4);
  trace.personal_view = random_matrix(9, 60, 4);
  auto top = [&](const Matrix& t) {
    auto r = naive_rank(state.user, t, iota_list(60));
    r.resize(20);
    return r;
  };
  const double oracle = rbo_oracle(top(trace.personal_view), top(trace.enhanced), 0.99);
  CHECK(std::abs(view_consistency_rbo(state, trace, 20, 0.99) - oracle) < 1e-9);
}

TEST_CASE("correlation export: orthogonal pair, raw, clip monotone, CSV") {
  const Matrix c{{1, 2}, {-3, 0.5}, {0, 0}, {0, 0}};
  const Matrix v{{0, 0}, {0, 0}, {4, -1}, {0.25, 7}};
  fed3cr::testing::TempDir dir("corr");
  const Matrix zero = export_correlation_matrix(c, v, 0.003, dir / "zero.csv");
  for (double x : zero.values()) CHECK(x == 0.0);
  std::istringstream lines(fed3cr::testing::read_file(dir / "zero.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    CHECK(line == "0,0");
    ++rows;
  }
  CHECK(rows == 2);

  const Matrix a = random_matrix(10, 30, 5), b = random_matrix(11, 30, 5);
  const Matrix raw = correlation_matrix(a, b, 0.0);
  const Matrix e = matmul_at(a, b);
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(raw.data()[i] == e.data()[i]);

  std::size_t prev = e.size() + 1;
  for (double clip = 0.0; clip < 10.0; clip += 0.25) {
    const Matrix clipped = correlation_matrix(a, b, clip);
    std::size_t count = 0;
    for (double x : e.values()) count += std::abs(x) > clip ? 1 : 0;
    CHECK(count_above(clipped, 0.0) == count);
    CHECK(count <= prev);
    prev = count;
  }

  std::ostringstream csv;
  write_correlation_csv(Matrix{{1.23456789, -0.5}, {0, 1e-7}}, csv);
  CHECK(csv.str() == "1.23457,-0.5\n0,1e-07\n");
}

TEST_CASE("metrics CSV layout") {
  CHECK(metrics_csv_header() == "round,hr10,ndcg10,rbo50,loss_rec,loss_a,loss_o,clients_evaluated");
  RoundMetrics m;
  m.round = 3;
  m.hr_at_k = 0.5;
  m.ndcg_at_k = 0.25;
  m.loss_rec = 1.0;
  m.clients_evaluated = 4;
  CHECK(metrics_csv_row(m) == "3,0.500000,0.250000,,1.000000,0.000000,0.000000,4");
  m.has_rbo = true;
  m.rbo = 0.75;
  CHECK(metrics_csv_row(m) == "3,0.500000,0.250000,0.750000,1.000000,0.000000,0.000000,4");
}
