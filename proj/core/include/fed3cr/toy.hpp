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

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <vector>

#include "fed3cr/datasets.hpp"

namespace fed3cr {

// Planted block structure: users in block b draw most positives from item
// block b and the rest uniformly from the other blocks. Inside a block, item
// popularity decays as 1 / (rank + 1)^popularity_skew under a fixed
// per-block permutation.
struct ToyDatasetSpec {
  int clients = 120;
  int items = 200;
  int blocks = 4;
  int positives_per_client = 20;
  double in_block_fraction = 0.8;
  double popularity_skew = 1.0;
  std::uint64_t seed = 7;

  void validate() const;
};

inline int toy_user_block(const ToyDatasetSpec& spec, int client) {
  return client % spec.blocks;
}

inline int toy_item_block(const ToyDatasetSpec& spec, int item) {
  const int per = spec.items / spec.blocks;
  return std::min(item / per, spec.blocks - 1);
}

// Records with user ids "u<i>", item ids "i<j>" and increasing timestamps.
std::vector<RawInteraction> generate_toy_records(const ToyDatasetSpec& spec);

// tsv with a user/item/rating/timestamp header.
void write_interactions_tsv(const std::vector<RawInteraction>& records, std::ostream& out);

// Built (min_interactions = 2) and leave-one-out split.
InteractionDataset make_toy_dataset(const ToyDatasetSpec& spec = {});

}  // namespace fed3cr
