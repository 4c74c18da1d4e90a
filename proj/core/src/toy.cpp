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

#include "fed3cr/toy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "fed3cr/errors.hpp"
#include "fed3cr/random.hpp"

namespace fed3cr {

void ToyDatasetSpec::validate() const {
  if (clients < 1 || items < 2 || blocks < 1) throw ConfigError("toy: clients, items, blocks must be positive");
  if (items / blocks < 2) throw ConfigError("toy: need at least two items per block");
  if (positives_per_client < 2 || positives_per_client > items) {
    throw ConfigError("toy: positives_per_client must lie in [2, items]");
  }
  if (!(in_block_fraction >= 0.0 && in_block_fraction <= 1.0)) {
    throw ConfigError("toy: in_block_fraction must lie in [0, 1]");
  }
  if (!(popularity_skew >= 0.0)) throw ConfigError("toy: popularity_skew must be >= 0");
}

std::vector<RawInteraction> generate_toy_records(const ToyDatasetSpec& spec) {
  spec.validate();
  const int per = spec.items / spec.blocks;
  // Per-block popularity weights over the block's items.
  std::vector<std::vector<double>> weights(spec.blocks);
  for (int b = 0; b < spec.blocks; ++b) {
    const int lo = b * per;
    const int hi = b + 1 == spec.blocks ? spec.items : lo + per;
    std::vector<int> rank(hi - lo);
    for (int k = 0; k < hi - lo; ++k) rank[k] = k;
    auto rng = make_stream(spec.seed, {0x70B0ULL, static_cast<std::uint64_t>(b)});
    std::shuffle(rank.begin(), rank.end(), rng);
    for (int k = 0; k < hi - lo; ++k) {
      weights[b].push_back(1.0 / std::pow(rank[k] + 1.0, spec.popularity_skew));
    }
  }
  std::vector<RawInteraction> out;
  std::int64_t clock = 1'000'000;
  for (int u = 0; u < spec.clients; ++u) {
    auto rng = make_stream(spec.seed, {0x70ULL, static_cast<std::uint64_t>(u)});
    const int block = toy_user_block(spec, u);
    const int lo = block * per;
    const int hi = block + 1 == spec.blocks ? spec.items : lo + per;
    const int in_block = std::min<int>(
        hi - lo, static_cast<int>(spec.in_block_fraction * spec.positives_per_client + 0.5));
    std::set<int> chosen;
    std::discrete_distribution<int> pick(weights[block].begin(), weights[block].end());
    while (static_cast<int>(chosen.size()) < in_block) chosen.insert(lo + pick(rng));
    while (static_cast<int>(chosen.size()) < spec.positives_per_client) {
      chosen.insert(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(spec.items))));
    }
    std::vector<int> order(chosen.begin(), chosen.end());
    std::shuffle(order.begin(), order.end(), rng);
    for (int item : order) {
      out.push_back({"u" + std::to_string(u), "i" + std::to_string(item), 1.0, clock++});
    }
  }
  return out;
}

void write_interactions_tsv(const std::vector<RawInteraction>& records, std::ostream& out) {
  out << "user\titem\trating\ttimestamp\n";
  for (const auto& r : records) {
    out << r.user_id << '\t' << r.item_id << '\t' << r.rating.value_or(1.0) << '\t'
        << r.timestamp.value_or(0) << '\n';
  }
}

InteractionDataset make_toy_dataset(const ToyDatasetSpec& spec) {
  return leave_one_out_split(build_dataset(generate_toy_records(spec), 2), spec.seed);
}

}  // namespace fed3cr
