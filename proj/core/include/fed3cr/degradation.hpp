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
#include <ostream>
#include <string>
#include <vector>

#include "fed3cr/datasets.hpp"
#include "fed3cr/model.hpp"
#include "fed3cr/numerics.hpp"

namespace fed3cr {

// Client with loss 1/2 ||C - C*||_F^2: identity Hessian, lambda_min = 1.
struct QuadraticClient {
  Matrix optimum;

  double loss(const Matrix& c) const;
  Matrix gradient(const Matrix& c) const;
};

struct DegradationReport {
  Matrix consensus;                // mean of optima
  std::vector<double> distance;    // ||C - C_i*||
  std::vector<double> bound;       // delta_i = mean_j delta_ij
  Matrix delta;                    // delta_ij = ||grad L_j(C_i*)|| = ||C_i* - C_j*||
  std::vector<bool> satisfied;     // distance_i <= delta_i
  double tolerance = 1e-12;        // slack allowed on the comparison

  std::size_t violations() const;
  std::string to_json() const;
};

// Throws ConfigError with fewer than two clients and ShapeError on mixed
// shapes.
DegradationReport verify_bound(const std::vector<QuadraticClient>& clients);

// Random quadratic fixtures: `clients` optima of shape rows x cols with
// N(0, 1) entries from stream (seed, index).
std::vector<QuadraticClient> random_quadratic_fixture(std::uint64_t seed, std::uint64_t index,
                                                      int clients, int rows, int cols);

struct FixtureSweepSummary {
  int fixtures = 0;
  std::size_t clients_checked = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // largest distance_i / delta_i over clients with delta_i > 0

  std::string to_json() const;
};

// verify_bound over `count` random fixtures. Fixture i draws its client count
// from [2, max_clients] and its rows and cols from [1, max_dim] using stream
// (seed, i), then its optima from random_quadratic_fixture(seed, i, ...).
FixtureSweepSummary verify_random_fixtures(std::uint64_t seed, int count, int max_clients,
                                           int max_dim);

struct PrefixAggregate {
  std::size_t clients = 0;          // prefix size k
  Vector mean;
  double norm = 0.0;
  std::vector<double> cosines;      // cosine of each prefix vector to the mean
};

struct ToyExampleReport {
  std::vector<PrefixAggregate> prefixes;  // k = 1..n
  std::vector<double> input_norms;
  bool degraded = false;         // full mean shorter than every input vector
  bool norms_nonincreasing = false;  // over prefixes k >= 2
  int least_aligned = -1;        // client with the lowest cosine to the full mean
  int most_angular_outlier = -1; // client with the largest mean angle to the others

  std::string to_json() const;
};

// Aggregates every prefix of `vectors` (all of one dimension). Throws
// ConfigError with fewer than two vectors.
ToyExampleReport toy_example_report(const std::vector<Vector>& vectors);

struct HeterogeneityProbe {
  std::vector<int> client_ids;
  std::vector<double> gradient_norms;  // ||grad L_i(C_ref)||
  // ||grad L_i(C_ref) - grad L_j(C_ref)||: symmetric, zero diagonal.
  Matrix delta_difference;
  // Triangle form: ||grad L_j - grad L_i|| + ||grad L_i||, row i.
  Matrix delta_triangle;

  std::string to_json() const;
};

// Gradient of the reconstruction loss with respect to the global table,
// evaluated with the client's own u_i, V_i and theta_i but C_i = c_ref.
// The batch holds every train positive plus a fixed negative set derived
// from (seed, positive set), so clients with identical data share it.
template <typename T>
BasicMatrix<T> reconstruction_gradient(const ClientState<T>& client, const BasicMatrix<T>& c_ref,
                                       const InteractionDataset& ds, const ModelSpec& spec,
                                       int negatives_per_positive, std::uint64_t seed);

template <typename T>
HeterogeneityProbe empirical_heterogeneity_probe(const std::vector<ClientState<T>>& clients,
                                                 const BasicMatrix<T>& c_ref,
                                                 const InteractionDataset& ds,
                                                 const ModelSpec& spec,
                                                 int negatives_per_positive, std::uint64_t seed,
                                                 int workers = 1);

void write_matrix_csv(const Matrix& m, std::ostream& out);

}  // namespace fed3cr
