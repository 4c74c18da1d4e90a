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

#include "fed3cr/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "fed3cr/errors.hpp"
#include "fed3cr/losses.hpp"
#include "fed3cr/parallel.hpp"
#include "fed3cr/random.hpp"

namespace fed3cr {
namespace {

// Sum that does not depend on the order of its inputs.
double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

double distance(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

nlohmann::ordered_json matrix_json(const Matrix& m) {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

std::uint64_t fnv1a(const std::vector<int>& items) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int v : items) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

double QuadraticClient::loss(const Matrix& c) const {
  const double d = distance(c, optimum);
  return 0.5 * d * d;
}

Matrix QuadraticClient::gradient(const Matrix& c) const {
  require_same_shape(c, optimum, "QuadraticClient::gradient");
  Matrix g(c.rows(), c.cols());
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = c.data()[i] - optimum.data()[i];
  return g;
}

std::size_t DegradationReport::violations() const {
  return static_cast<std::size_t>(std::count(satisfied.begin(), satisfied.end(), false));
}

std::string DegradationReport::to_json() const {
  nlohmann::ordered_json j;
  j["clients"] = distance.size();
  j["consensus"] = matrix_json(consensus);
  j["distance"] = distance;
  j["bound"] = bound;
  j["delta"] = matrix_json(delta);
  j["satisfied"] = satisfied;
  j["violations"] = violations();
  j["tolerance"] = tolerance;
  return j.dump(2);
}

DegradationReport verify_bound(const std::vector<QuadraticClient>& clients) {
  const std::size_t n = clients.size();
  if (n < 2) throw ConfigError("verify_bound: need at least two clients");
  const Matrix& first = clients.front().optimum;
  for (const auto& c : clients) require_same_shape(first, c.optimum, "verify_bound");

  DegradationReport r;
  r.consensus = Matrix(first.rows(), first.cols());
  std::vector<double> column(n);
  for (std::size_t e = 0; e < first.size(); ++e) {
    for (std::size_t i = 0; i < n; ++i) column[i] = clients[i].optimum.data()[e];
    r.consensus.data()[e] = sorted_sum(column) / static_cast<double>(n);
  }

  // grad L_j at C_i* is C_i* - C_j*, and grad L_i(C_i*) = 0.
  r.delta = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = frobenius_norm(clients[i].gradient(clients[j].optimum));
      r.delta(i, j) = d;
      r.delta(j, i) = d;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = r.delta.row(i);
    const double delta_i = sorted_sum({row.begin(), row.end()}) / static_cast<double>(n);
    const double dist = distance(r.consensus, clients[i].optimum);
    r.distance.push_back(dist);
    r.bound.push_back(delta_i);
    r.satisfied.push_back(dist <= delta_i * (1.0 + r.tolerance) + r.tolerance);
  }
  return r;
}

std::vector<QuadraticClient> random_quadratic_fixture(std::uint64_t seed, std::uint64_t index,
                                                      int clients, int rows, int cols) {
  auto rng = make_stream(seed, {0xB0D0ULL, index});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<QuadraticClient> out(static_cast<std::size_t>(clients));
  for (auto& c : out) {
    c.optimum = Matrix(rows, cols);
    for (auto& v : c.optimum.span()) v = normal(rng);
  }
  return out;
}

std::string FixtureSweepSummary::to_json() const {
  nlohmann::ordered_json j;
  j["fixtures"] = fixtures;
  j["clients_checked"] = clients_checked;
  j["violations"] = violations;
  j["max_ratio"] = max_ratio;
  return j.dump(2);
}

FixtureSweepSummary verify_random_fixtures(std::uint64_t seed, int count, int max_clients,
                                           int max_dim) {
  if (count < 1) throw ConfigError("fixtures: must be >= 1");
  if (max_clients < 2) throw ConfigError("max_clients: must be >= 2");
  if (max_dim < 1) throw ConfigError("max_dim: must be >= 1");
  FixtureSweepSummary s;
  s.fixtures = count;
  for (int i = 0; i < count; ++i) {
    auto rng = make_stream(seed, {0xF1C7ULL, static_cast<std::uint64_t>(i)});
    const int clients = 2 + static_cast<int>(uniform_index(rng, max_clients - 1));
    const int rows = 1 + static_cast<int>(uniform_index(rng, max_dim));
    const int cols = 1 + static_cast<int>(uniform_index(rng, max_dim));
    const auto report = verify_bound(
        random_quadratic_fixture(seed, static_cast<std::uint64_t>(i), clients, rows, cols));
    s.clients_checked += report.distance.size();
    s.violations += report.violations();
    for (std::size_t c = 0; c < report.distance.size(); ++c) {
      if (report.bound[c] > 0.0) s.max_ratio = std::max(s.max_ratio, report.distance[c] / report.bound[c]);
    }
  }
  return s;
}

std::string ToyExampleReport::to_json() const {
  nlohmann::ordered_json j;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : prefixes) {
    arr.push_back({{"clients", p.clients},
                   {"mean", p.mean.values()},
                   {"norm", p.norm},
                   {"cosines", p.cosines}});
  }
  j["prefixes"] = arr;
  j["input_norms"] = input_norms;
  j["degraded"] = degraded;
  j["norms_nonincreasing"] = norms_nonincreasing;
  j["least_aligned"] = least_aligned;
  j["most_angular_outlier"] = most_angular_outlier;
  return j.dump(2);
}

ToyExampleReport toy_example_report(const std::vector<Vector>& vectors) {
  const std::size_t n = vectors.size();
  if (n < 2) throw ConfigError("toy_example_report: need at least two vectors");
  const std::size_t d = vectors.front().dim();
  for (const auto& v : vectors) {
    if (v.dim() != d) throw ShapeError("toy_example_report: vectors differ in dimension");
  }
  ToyExampleReport r;
  for (const auto& v : vectors) r.input_norms.push_back(norm2(v.span()));

  Vector sum(d);
  for (std::size_t k = 1; k <= n; ++k) {
    axpy<double>(1.0, vectors[k - 1].span(), sum.span());
    PrefixAggregate p;
    p.clients = k;
    p.mean = Vector(d);
    for (std::size_t c = 0; c < d; ++c) p.mean[c] = sum[c] / static_cast<double>(k);
    p.norm = norm2<double>(p.mean.span());
    for (std::size_t i = 0; i < k; ++i) p.cosines.push_back(cosine_similarity(vectors[i], p.mean));
    r.prefixes.push_back(std::move(p));
  }

  const auto& full = r.prefixes.back();
  r.degraded = std::all_of(r.input_norms.begin(), r.input_norms.end(),
                           [&](double x) { return full.norm < x; });
  r.norms_nonincreasing = true;
  for (std::size_t k = 2; k < r.prefixes.size(); ++k) {
    if (r.prefixes[k].norm > r.prefixes[k - 1].norm) r.norms_nonincreasing = false;
  }
  r.least_aligned = static_cast<int>(
      std::min_element(full.cosines.begin(), full.cosines.end()) - full.cosines.begin());

  double worst = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double angle = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) angle += std::acos(cosine_similarity(vectors[i], vectors[j]));
    }
    if (angle > worst) {
      worst = angle;
      r.most_angular_outlier = static_cast<int>(i);
    }
  }
  return r;
}

std::string HeterogeneityProbe::to_json() const {
  nlohmann::ordered_json j;
  j["client_ids"] = client_ids;
  j["gradient_norms"] = gradient_norms;
  j["delta_difference"] = matrix_json(delta_difference);
  j["delta_triangle"] = matrix_json(delta_triangle);
  return j.dump(2);
}

template <typename T>
BasicMatrix<T> reconstruction_gradient(const ClientState<T>& client, const BasicMatrix<T>& c_ref,
                                       const InteractionDataset& ds, const ModelSpec& spec,
                                       int negatives_per_positive, std::uint64_t seed) {
  const auto& data = ds.client(client.client_id);
  ClientState<T> probe = client;
  require_same_shape(probe.global_table, c_ref, "reconstruction_gradient");
  probe.global_table = c_ref;

  TrainingBatch batch;
  for (int j : data.items) {
    batch.items.push_back(j);
    batch.labels.push_back(1.0f);
  }
  const NegativeSampler sampler(ds, negatives_per_positive);
  const auto universe = sampler.candidate_universe(client.client_id);
  if (!universe.empty() && negatives_per_positive > 0) {
    auto rng = make_stream(seed, {0xDE17AULL, fnv1a(data.items)});
    const std::size_t want = data.items.size() * static_cast<std::size_t>(negatives_per_positive);
    const std::size_t k = std::min(want, universe.size());
    for (auto idx : sample_without_replacement(rng, universe.size(), k)) {
      batch.items.push_back(universe[idx]);
      batch.labels.push_back(0.0f);
    }
  }

  LossConfig cfg;
  cfg.consistency_enabled = false;
  cfg.complementarity_enabled = false;
  const ForwardTrace<T> trace = forward(probe, data.items, spec);
  auto grads = ClientGradients<T>::zeros_like(probe);
  total_loss(probe, trace, batch, data.items, spec, cfg, &grads);
  return grads.global_table;
}

template <typename T>
HeterogeneityProbe empirical_heterogeneity_probe(const std::vector<ClientState<T>>& clients,
                                                 const BasicMatrix<T>& c_ref,
                                                 const InteractionDataset& ds,
                                                 const ModelSpec& spec,
                                                 int negatives_per_positive, std::uint64_t seed,
                                                 int workers) {
  const std::size_t n = clients.size();
  std::vector<BasicMatrix<T>> grads(n);
  parallel_for(n, workers, [&](std::size_t i) {
    grads[i] = reconstruction_gradient(clients[i], c_ref, ds, spec, negatives_per_positive, seed);
  });
  HeterogeneityProbe p;
  p.delta_difference = Matrix(n, n);
  p.delta_triangle = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    p.client_ids.push_back(clients[i].client_id);
    p.gradient_norms.push_back(static_cast<double>(frobenius_norm(grads[i])));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t e = 0; e < grads[i].size(); ++e) {
        const double d =
            static_cast<double>(grads[i].data()[e]) - static_cast<double>(grads[j].data()[e]);
        s += d * d;
      }
      p.delta_difference(i, j) = p.delta_difference(j, i) = std::sqrt(s);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      p.delta_triangle(i, j) = p.delta_difference(i, j) + p.gradient_norms[i];
    }
  }
  return p;
}

void write_matrix_csv(const Matrix& m, std::ostream& out) {
  char buf[64];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", m(r, c));
      if (c > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

#define FED3CR_INSTANTIATE_DEG(T)                                                          \
  template BasicMatrix<T> reconstruction_gradient<T>(const ClientState<T>&,                \
                                                     const BasicMatrix<T>&,                \
                                                     const InteractionDataset&,            \
                                                     const ModelSpec&, int, std::uint64_t); \
  template HeterogeneityProbe empirical_heterogeneity_probe<T>(                            \
      const std::vector<ClientState<T>>&, const BasicMatrix<T>&, const InteractionDataset&, \
      const ModelSpec&, int, std::uint64_t, int);

FED3CR_INSTANTIATE_DEG(float)
FED3CR_INSTANTIATE_DEG(double)

#undef FED3CR_INSTANTIATE_DEG

}  // namespace fed3cr
