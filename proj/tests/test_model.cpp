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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "fed3cr/model.hpp"
#include "fed3cr/random.hpp"

using namespace fed3cr;

namespace {

Matrix random_matrix(std::uint64_t seed, std::size_t r, std::size_t c) {
  auto rng = make_stream(seed, {0x3A7});
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (auto& v : m.span()) v = n(rng);
  return m;
}

ModelSpec small_spec(int d, int m) {
  ModelSpec s;
  s.dim = d;
  s.num_items = m;
  return s;
}

}  // namespace

TEST_CASE("prototypes: singleton, two-row mean, naive oracle") {
  const Matrix c{{1, 0}, {0, 1}, {3, 4}};
  const Matrix v{{5, 6}, {7, 8}, {9, 10}};
  const std::vector<int> one{2};
  auto [pg, pp] = compute_prototypes(c, v, one);
  CHECK(pg.values() == std::vector<double>{3, 4});
  CHECK(pp.values() == std::vector<double>{9, 10});

  const std::vector<int> two{0, 1};
  CHECK(row_mean(c, two).values() == std::vector<double>{0.5, 0.5});

  const Matrix big = random_matrix(1, 200, 8);
  auto rng = make_stream(2, {});
  std::vector<int> pos;
  for (auto i : sample_without_replacement(rng, 200, 50)) pos.push_back(static_cast<int>(i));
  const Vector mean = row_mean(big, pos);
  for (std::size_t k = 0; k < 8; ++k) {
    double acc = 0.0;
    for (int j : pos) acc += big(j, k);
    CHECK(std::abs(mean[k] - acc / 50.0) < 1e-12);
  }
  CHECK_THROWS_AS(row_mean(big, std::vector<int>{}), DataError);
}

TEST_CASE("transfer matrix: zero final layer gives W = 0, rigged bias gives I") {
  const int d = 3;
  ModelSpec spec = small_spec(d, 5);
  auto state = init_client<double>(4, 0, spec);
  const Vector pg{0.1, -0.2, 0.3}, pp{0.0, 0.5, -0.1};

  auto zeroed = state.net;
  zeroed.weights.back().fill(0.0);
  zeroed.biases.back().fill(0.0);
  const Matrix w0 = generate_transfer_matrix(zeroed, pg, pp);
  CHECK(w0.rows() == 3);
  CHECK(w0.cols() == 3);
  for (double x : w0.values()) CHECK(x == 0.0);

  auto rigged = zeroed;
  for (int i = 0; i < d; ++i) rigged.biases.back()[static_cast<std::size_t>(i * d + i)] = 1.0;
  const Matrix w1 = generate_transfer_matrix(rigged, pg, pp);
  CHECK(w1.values() == Matrix::identity(3).values());
  const Matrix w2 = generate_transfer_matrix(rigged, pg, pp, 2.0);
  CHECK(w2(1, 1) == 2.0);
}

TEST_CASE("transfer matrix input order is [p_G, p_P]") {
  ModelSpec spec = small_spec(2, 4);
  auto net = make_transfer_net<double>({4}, 4);
  // Single linear layer: output k reads input k, so W row-major = [pG0, pG1, pP0, pP1].
  for (int k = 0; k < 4; ++k) net.weights[0](k, k) = 1.0;
  const Matrix w = generate_transfer_matrix(net, Vector{1, 2}, Vector{3, 4});
  CHECK(w.values() == std::vector<double>{1, 2, 3, 4});
  CHECK(transfer_net_shape(spec).first.front() == 4);
  CHECK(transfer_net_shape(spec).second == 4);
}

TEST_CASE("every W entry is differentiable in theta and both prototypes") {
  const int d = 3;
  ModelSpec spec = small_spec(d, 5);
  auto state = init_client<double>(7, 0, spec);
  // Move the final layer off its near-zero init.
  auto rng = make_stream(7, {1});
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& v : state.net.weights.back().span()) v = n(rng);
  for (auto& b : state.net.biases)
    for (auto& v : b) v = n(rng);
  const Vector pg{0.4, -0.3, 0.8}, pp{-0.5, 0.2, 0.6};
  const Matrix r = random_matrix(9, d, d);  // projection weights
  const double scale = 1.5;

  auto objective = [&](const TransferNet<double>& net, const Vector& g, const Vector& p) {
    const Matrix w = generate_transfer_matrix(net, g, p, scale);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += r.data()[i] * w.data()[i];
    return s;
  };

  MlpCache<double> cache;
  generate_transfer_matrix(state.net, pg, pp, scale, &cache);
  auto grad = make_transfer_net<double>(state.net.widths, state.net.output_dim);
  std::vector<double> dout(r.values());
  for (auto& v : dout) v *= scale;
  std::vector<double> dinput(2 * d, 0.0);
  mlp_backward<double>(state.net, cache, dout, grad, dinput);

  // theta
  const auto flat = state.net.flatten();
  Matrix params(1, flat.size(), std::vector<double>(flat));
  const auto gflat = grad.flatten();
  Matrix analytic(1, gflat.size(), std::vector<double>(gflat));
  auto f_theta = [&](const Matrix& p) {
    auto net = state.net;
    net.assign_flat(p.span());
    return objective(net, pg, pp);
  };
  CHECK(grad_check(f_theta, params, analytic, 1e-5, 1e-4).passed);

  // prototypes
  std::vector<double> protos(pg.values());
  protos.insert(protos.end(), pp.values().begin(), pp.values().end());
  auto f_proto = [&](const Matrix& p) {
    Vector g(d), q(d);
    for (int k = 0; k < d; ++k) {
      g[k] = p(0, k);
      q[k] = p(0, d + k);
    }
    return objective(state.net, g, q);
  };
  const auto rep = grad_check(f_proto, Matrix(1, 2 * d, protos), Matrix(1, 2 * d, dinput), 1e-5, 1e-4);
  CHECK(rep.passed);
  CHECK(rep.entries_checked > 0);
}

TEST_CASE("enhance_consensus: identity, scaling, per-row oracle, linearity") {
  const Matrix c = random_matrix(11, 3, 2);
  CHECK(enhance_consensus(Matrix::identity(2), c).values() == c.values());
  const Matrix doubled = enhance_consensus(scaled(Matrix::identity(2), 2.0), c);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(doubled.data()[i] == 2.0 * c.data()[i]);

  const Matrix w = random_matrix(12, 2, 2);
  const Matrix e = enhance_consensus(w, c);
  for (std::size_t j = 0; j < 3; ++j) {
    const Vector wc = matvec(w, c.row(j));
    for (std::size_t k = 0; k < 2; ++k) CHECK(e(j, k) == doctest::Approx(wc[k]).epsilon(1e-14));
  }

  const Matrix a = random_matrix(13, 6, 4), b = random_matrix(14, 6, 4), w4 = random_matrix(15, 4, 4);
  const Matrix lhs = enhance_consensus(w4, add(a, b));
  const Matrix rhs = add(enhance_consensus(w4, a), enhance_consensus(w4, b));
  for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs.data()[i] - rhs.data()[i]) < 1e-6);

  CHECK_THROWS_AS(enhance_consensus(Matrix::identity(3), c), ShapeError);
}

TEST_CASE("fuse: zero, cancellation, commutativity, shapes") {
  const Matrix a = random_matrix(20, 4, 3), b = random_matrix(21, 4, 3);
  CHECK(fuse(a, Matrix(4, 3)).values() == a.values());
  const Matrix cancelled = fuse(a, scaled(a, -1.0));
  for (double v : cancelled.values()) CHECK(v == 0.0);
  CHECK(fuse(a, b).values() == fuse(b, a).values());
  CHECK_THROWS_AS(fuse(a, Matrix(3, 4)), ShapeError);
}

TEST_CASE("predict: sigmoid anchors and monotonicity") {
  const std::vector<double> u{1, 2}, v{0.5, -0.25}, zero{0, 0};
  CHECK(predict<double>(zero, zero) == 0.5);
  CHECK(predict<double>(u, v) == 0.5);
  const std::vector<double> a{40}, b{1};
  CHECK(std::abs(predict<double>(a, b) - 1.0) < 1e-12);
  const std::vector<double> neg{-800};
  CHECK(predict<double>(neg, b) >= 0.0);
  double prev = 0.0;
  for (double x = -10.0; x <= 10.0; x += 0.5) {
    const std::vector<double> ux{x};
    const double p = predict<double>(ux, b);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("init_client: deterministic, shapes, small initial transfer") {
  ModelSpec spec = small_spec(2, 3);
  const auto a = init_client<double>(5, 3, spec);
  const auto b = init_client<double>(5, 3, spec);
  CHECK(a == b);
  CHECK_FALSE(a == init_client<double>(5, 4, spec));
  CHECK(a.user.dim() == 2);
  CHECK(a.global_table.rows() == 3);
  CHECK(a.global_table.cols() == 2);
  CHECK(a.personal_table.rows() == 3);
  CHECK(a.net.input_dim() == 4);
  CHECK(a.net.output_dim == 4);

  ModelSpec big = small_spec(32, 100);
  const auto s = init_client<double>(42, 0, big);
  const auto trace = forward(s, std::vector<int>{0, 5, 9, 42}, big);
  CHECK(frobenius_norm(trace.transfer) < 0.1);

  // Every client shares one parameter count.
  CHECK(init_client<float>(1, 0, big).net.parameter_count() ==
        init_client<float>(2, 9, big).net.parameter_count());

  ModelSpec fedmf = small_spec(4, 6);
  fedmf.base = BaseModel::kFedMf;
  fedmf.enhancement = EnhancementKind::kNone;
  CHECK(init_client<double>(1, 0, fedmf).personal_table.rows() == 0);
}

TEST_CASE("identity transfer reduces to additive personalization") {
  ModelSpec ace = small_spec(4, 6);
  ace.ace_init = AceInit::kIdentity;
  auto s = init_client<double>(3, 0, ace);
  s.net.weights.back().fill(0.0);  // freeze W at exactly I
  const std::vector<int> pos{1, 3};
  const auto t = forward(s, pos, ace);
  CHECK(t.transfer.values() == Matrix::identity(4).values());
  const Matrix additive = add(s.global_table, s.personal_table);
  for (std::size_t i = 0; i < additive.size(); ++i) CHECK(t.fused.data()[i] == doctest::Approx(additive.data()[i]).epsilon(1e-15));

  ModelSpec c0 = small_spec(4, 6);
  c0.enhancement = EnhancementKind::kNone;
  const auto t0 = forward(s, pos, c0);
  CHECK(t0.fused.values() == additive.values());
}

TEST_CASE("row-wise transfer nets map d to d") {
  ModelSpec ct = small_spec(4, 6);
  ct.enhancement = EnhancementKind::kConsensusTransfer;
  const auto [widths, out] = transfer_net_shape(ct);
  CHECK(widths.front() == 4);
  CHECK(out == 4);
  const auto s = init_client<double>(1, 0, ct);
  const auto t = forward(s, std::vector<int>{0, 2}, ct);
  CHECK(t.enhanced.rows() == 6);
  CHECK(t.enhanced.cols() == 4);
}

TEST_CASE("transfer net flatten round-trips") {
  ModelSpec spec = small_spec(3, 4);
  const auto s = init_client<double>(8, 1, spec);
  auto copy = make_transfer_net<double>(s.net.widths, s.net.output_dim);
  const auto flat = s.net.flatten();
  CHECK(flat.size() == s.net.parameter_count());
  copy.assign_flat(flat);
  CHECK(copy == s.net);
}
