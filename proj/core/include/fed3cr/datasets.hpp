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
#include <filesystem>
#include <istream>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "fed3cr/errors.hpp"

namespace fed3cr {

struct RawInteraction {
  std::string user_id;
  std::string item_id;
  std::optional<double> rating;
  std::optional<std::int64_t> timestamp;
};

enum class DataFormat { kMovieLensDat, kTsv, kCsv };

DataFormat parse_data_format(const std::string& name);
std::string to_string(DataFormat format);

// How leave_one_out_split picks the held-out positive.
enum class HoldoutRule {
  kLatestTimestamp,  // falls back to seeded-uniform when timestamps are absent
  kRandom,
};

struct ClientData {
  // Sorted dense item ids. Before the split these are all positives; after it,
  // the train positives only.
  std::vector<int> items;
  // Parallel to items when the source carried timestamps, otherwise empty.
  std::vector<std::int64_t> timestamps;
  int test_item = -1;

  bool has_test_item() const { return test_item >= 0; }
  bool is_positive(int item) const;
};

class InteractionDataset {
 public:
  InteractionDataset() = default;
  InteractionDataset(std::vector<ClientData> clients,
                     std::vector<std::string> user_ids,
                     std::vector<std::string> item_ids, bool has_timestamps);

  int num_clients() const { return static_cast<int>(clients_.size()); }
  int num_items() const { return static_cast<int>(item_ids_.size()); }
  // Train positives plus held-out items.
  long long num_interactions() const;
  bool has_timestamps() const { return has_timestamps_; }
  bool is_split() const;

  const ClientData& client(int i) const { return clients_.at(i); }
  const std::vector<ClientData>& clients() const { return clients_; }
  std::vector<ClientData>& mutable_clients() { return clients_; }

  const std::string& external_user(int dense) const { return user_ids_.at(dense); }
  const std::string& external_item(int dense) const { return item_ids_.at(dense); }
  std::optional<int> dense_user(const std::string& external) const;
  std::optional<int> dense_item(const std::string& external) const;

 private:
  std::vector<ClientData> clients_;
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, int> user_index_;
  std::unordered_map<std::string, int> item_index_;
  bool has_timestamps_ = false;
};

struct DatasetStats {
  int clients = 0;
  int items = 0;
  long long interactions = 0;
  double avg = 0.0;
  double sparsity = 0.0;

  std::string to_json() const;
};

DatasetStats compute_stats(const InteractionDataset& ds);

// Parses records. movielens-dat is `user::item::rating::timestamp`; tsv/csv
// require a header naming `user` and `item` columns, with optional `rating`
// and `timestamp`. Throws ParseError with the offending line number.
std::vector<RawInteraction> parse_interactions(std::istream& in,
                                               DataFormat format);

// Deduplicates (user, item) pairs (keeping the latest timestamp), drops users
// with fewer than min_interactions distinct items, binarizes ratings and
// assigns dense ids in order of first appearance. Throws ConfigError when no
// user survives.
InteractionDataset build_dataset(const std::vector<RawInteraction>& records,
                                 int min_interactions);

InteractionDataset load_dataset(const std::filesystem::path& path,
                                DataFormat format, int min_interactions);

// Moves exactly one positive per client to its test slot. With timestamps the
// latest wins (ties go to the larger dense id); otherwise the choice is seeded
// per client. Throws DataError naming the first client with fewer than two
// positives.
InteractionDataset leave_one_out_split(InteractionDataset ds, std::uint64_t seed,
                                       HoldoutRule rule = HoldoutRule::kLatestTimestamp);

struct TrainingBatch {
  std::vector<int> items;
  std::vector<float> labels;  // 1 for positives, 0 for sampled negatives
  bool sampled_with_replacement = false;

  std::size_t size() const { return items.size(); }
};

// Training-time negatives for one dataset. Stateless apart from configuration;
// randomness comes from the caller's stream so parallel clients stay
// reproducible.
class NegativeSampler {
 public:
  NegativeSampler(const InteractionDataset& ds, int negatives_per_positive);

  int negatives_per_positive() const { return negatives_per_positive_; }

  // Every train positive of `client` plus negatives_per_positive negatives
  // each, shuffled and truncated to batch_size. Negatives never hit a train
  // positive or the test item. When too few candidates exist negatives are
  // drawn with replacement (or omitted when there are none) and a warning is
  // recorded.
  TrainingBatch sample(int client, int batch_size, std::mt19937_64& rng,
                       Warnings* warnings = nullptr) const;

  // Items that are neither train positives, the test item, nor held out for
  // `client`.
  std::vector<int> candidate_universe(int client) const;

  // Removes `items` from the client's negative universe. Holding out every
  // evaluation candidate keeps the test item and its ranking competitors on
  // equal footing during training.
  void hold_out(int client, std::vector<int> items);
  bool is_excluded(int client, int item) const;

 private:
  std::size_t excluded_count(int client) const;

  const InteractionDataset* ds_;
  int negatives_per_positive_;
  std::vector<std::vector<int>> held_out_;  // sorted, per client
};

// Held-out test item followed by num_negatives non-interacted items, fixed by
// (client, seed).
std::vector<int> build_eval_candidates(const InteractionDataset& ds, int client,
                                       int num_negatives, std::uint64_t seed,
                                       Warnings* warnings = nullptr);

}  // namespace fed3cr
