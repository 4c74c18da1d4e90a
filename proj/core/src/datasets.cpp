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

#include "fed3cr/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

#include "json.hpp"

#include "fed3cr/random.hpp"

namespace fed3cr {
namespace {

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s, long line) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  // std::from_chars for double is available in libstdc++ 11.
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("line " + std::to_string(line) + ": bad rating '" +
                         std::string(s) + "'",
                     line);
  }
  return v;
}

std::optional<std::int64_t> parse_timestamp(std::string_view s, long line) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("line " + std::to_string(line) + ": bad timestamp '" +
                         std::string(s) + "'",
                     line);
  }
  return v;
}

RawInteraction make_record(std::string_view user, std::string_view item,
                           long line) {
  user = trim(user);
  item = trim(item);
  if (user.empty() || item.empty()) {
    throw ParseError("line " + std::to_string(line) + ": empty user or item id",
                     line);
  }
  return RawInteraction{std::string(user), std::string(item), std::nullopt,
                        std::nullopt};
}

}  // namespace

DataFormat parse_data_format(const std::string& name) {
  if (name == "movielens-dat") return DataFormat::kMovieLensDat;
  if (name == "tsv") return DataFormat::kTsv;
  if (name == "csv") return DataFormat::kCsv;
  throw ConfigError("unknown dataset format '" + name +
                    "' (expected movielens-dat, tsv or csv)");
}

std::string to_string(DataFormat format) {
  switch (format) {
    case DataFormat::kMovieLensDat: return "movielens-dat";
    case DataFormat::kTsv: return "tsv";
    case DataFormat::kCsv: return "csv";
  }
  return "unknown";
}

bool ClientData::is_positive(int item) const {
  return std::binary_search(items.begin(), items.end(), item);
}

InteractionDataset::InteractionDataset(std::vector<ClientData> clients,
                                       std::vector<std::string> user_ids,
                                       std::vector<std::string> item_ids,
                                       bool has_timestamps)
    : clients_(std::move(clients)),
      user_ids_(std::move(user_ids)),
      item_ids_(std::move(item_ids)),
      has_timestamps_(has_timestamps) {
  if (clients_.size() != user_ids_.size()) {
    throw ShapeError("InteractionDataset: one external id per client required");
  }
  for (int i = 0; i < static_cast<int>(user_ids_.size()); ++i)
    user_index_.emplace(user_ids_[i], i);
  for (int i = 0; i < static_cast<int>(item_ids_.size()); ++i)
    item_index_.emplace(item_ids_[i], i);
}

long long InteractionDataset::num_interactions() const {
  long long total = 0;
  for (const auto& c : clients_) {
    total += static_cast<long long>(c.items.size()) + (c.has_test_item() ? 1 : 0);
  }
  return total;
}

bool InteractionDataset::is_split() const {
  return !clients_.empty() &&
         std::all_of(clients_.begin(), clients_.end(),
                     [](const ClientData& c) { return c.has_test_item(); });
}

std::optional<int> InteractionDataset::dense_user(const std::string& external) const {
  auto it = user_index_.find(external);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> InteractionDataset::dense_item(const std::string& external) const {
  auto it = item_index_.find(external);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

std::string DatasetStats::to_json() const {
  nlohmann::ordered_json j;
  j["clients"] = clients;
  j["items"] = items;
  j["interactions"] = interactions;
  j["avg"] = avg;
  j["sparsity"] = sparsity;
  return j.dump();
}

DatasetStats compute_stats(const InteractionDataset& ds) {
  DatasetStats s;
  s.clients = ds.num_clients();
  s.items = ds.num_items();
  s.interactions = ds.num_interactions();
  if (s.clients > 0) s.avg = static_cast<double>(s.interactions) / s.clients;
  if (s.clients > 0 && s.items > 0) {
    s.sparsity = 1.0 - static_cast<double>(s.interactions) /
                           (static_cast<double>(s.clients) * s.items);
  }
  return s;
}

std::vector<RawInteraction> parse_interactions(std::istream& in, DataFormat format) {
  std::vector<RawInteraction> out;
  std::string line;
  long lineno = 0;

  if (format == DataFormat::kMovieLensDat) {
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view sv = trim(line);
      if (sv.empty()) continue;
      auto fields = split(sv, "::");
      if (fields.size() < 2 || fields.size() > 4) {
        throw ParseError("line " + std::to_string(lineno) +
                             ": expected user::item::rating::timestamp",
                         lineno);
      }
      RawInteraction r = make_record(fields[0], fields[1], lineno);
      if (fields.size() > 2) r.rating = parse_double(fields[2], lineno);
      if (fields.size() > 3) r.timestamp = parse_timestamp(fields[3], lineno);
      out.push_back(std::move(r));
    }
    return out;
  }

  const std::string_view sep = format == DataFormat::kTsv ? "\t" : ",";
  int user_col = -1, item_col = -1, rating_col = -1, ts_col = -1;
  std::size_t ncols = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    auto fields = split(sv, sep);
    if (!have_header) {
      for (int c = 0; c < static_cast<int>(fields.size()); ++c) {
        std::string_view name = trim(fields[c]);
        if (name == "user") user_col = c;
        else if (name == "item") item_col = c;
        else if (name == "rating") rating_col = c;
        else if (name == "timestamp") ts_col = c;
        else
          throw ParseError("line " + std::to_string(lineno) +
                               ": unknown header column '" + std::string(name) + "'",
                           lineno);
      }
      if (user_col < 0 || item_col < 0) {
        throw ParseError("line " + std::to_string(lineno) +
                             ": header must name user and item columns",
                         lineno);
      }
      ncols = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != ncols) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                           std::to_string(ncols) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    }
    RawInteraction r = make_record(fields[user_col], fields[item_col], lineno);
    if (rating_col >= 0) r.rating = parse_double(fields[rating_col], lineno);
    if (ts_col >= 0) r.timestamp = parse_timestamp(fields[ts_col], lineno);
    out.push_back(std::move(r));
  }
  if (!have_header) throw ParseError("missing header line", lineno);
  return out;
}

InteractionDataset build_dataset(const std::vector<RawInteraction>& records,
                                 int min_interactions) {
  // Group by user in order of first appearance.
  std::unordered_map<std::string, int> user_slot;
  std::vector<std::string> user_order;
  struct Entry {
    std::string_view item;
    std::int64_t timestamp;
    std::size_t order;
  };
  std::vector<std::vector<Entry>> per_user;
  bool any_timestamp = false;
  bool all_timestamps = !records.empty();
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto [it, inserted] =
        user_slot.emplace(rec.user_id, static_cast<int>(user_order.size()));
    if (inserted) {
      user_order.push_back(rec.user_id);
      per_user.emplace_back();
    }
    any_timestamp |= rec.timestamp.has_value();
    all_timestamps &= rec.timestamp.has_value();
    per_user[it->second].push_back(
        Entry{rec.item_id, rec.timestamp.value_or(0), r});
  }
  const bool has_ts = any_timestamp && all_timestamps;

  // Deduplicate items per user; keep the latest timestamp and earliest order.
  std::vector<std::vector<Entry>> deduped(per_user.size());
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    std::unordered_map<std::string_view, std::size_t> seen;
    for (const auto& e : per_user[u]) {
      auto [it, inserted] = seen.emplace(e.item, deduped[u].size());
      if (inserted) {
        deduped[u].push_back(e);
      } else {
        auto& kept = deduped[u][it->second];
        kept.timestamp = std::max(kept.timestamp, e.timestamp);
      }
    }
  }

  // Filter users, then assign item ids in order of first surviving appearance.
  std::vector<int> kept_users;
  for (std::size_t u = 0; u < deduped.size(); ++u) {
    if (static_cast<int>(deduped[u].size()) >= min_interactions) {
      kept_users.push_back(static_cast<int>(u));
    }
  }
  if (kept_users.empty()) {
    throw ConfigError("no user has at least " + std::to_string(min_interactions) +
                      " interactions; dataset is empty after filtering");
  }
  std::vector<std::pair<std::size_t, std::string_view>> first_seen;
  {
    std::unordered_map<std::string_view, std::size_t> earliest;
    for (int u : kept_users) {
      for (const auto& e : deduped[u]) {
        auto [it, inserted] = earliest.emplace(e.item, e.order);
        if (!inserted) it->second = std::min(it->second, e.order);
      }
    }
    first_seen.reserve(earliest.size());
    for (const auto& [item, order] : earliest) first_seen.emplace_back(order, item);
    std::sort(first_seen.begin(), first_seen.end());
  }
  std::vector<std::string> item_ids;
  std::unordered_map<std::string_view, int> item_dense;
  item_ids.reserve(first_seen.size());
  for (const auto& [order, item] : first_seen) {
    item_dense.emplace(item, static_cast<int>(item_ids.size()));
    item_ids.emplace_back(item);
  }

  std::vector<ClientData> clients;
  std::vector<std::string> user_ids;
  clients.reserve(kept_users.size());
  for (int u : kept_users) {
    std::vector<std::pair<int, std::int64_t>> rows;
    rows.reserve(deduped[u].size());
    for (const auto& e : deduped[u]) rows.emplace_back(item_dense.at(e.item), e.timestamp);
    std::sort(rows.begin(), rows.end());
    ClientData c;
    for (const auto& [item, ts] : rows) {
      c.items.push_back(item);
      if (has_ts) c.timestamps.push_back(ts);
    }
    clients.push_back(std::move(c));
    user_ids.push_back(user_order[u]);
  }
  return InteractionDataset(std::move(clients), std::move(user_ids),
                            std::move(item_ids), has_ts);
}

InteractionDataset load_dataset(const std::filesystem::path& path,
                                DataFormat format, int min_interactions) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  std::vector<RawInteraction> records;
  try {
    records = parse_interactions(in, format);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
  return build_dataset(records, min_interactions);
}

InteractionDataset leave_one_out_split(InteractionDataset ds, std::uint64_t seed,
                                       HoldoutRule rule) {
  auto& clients = ds.mutable_clients();
  for (int i = 0; i < static_cast<int>(clients.size()); ++i) {
    ClientData& c = clients[i];
    if (c.has_test_item()) {
      throw DataError("client " + ds.external_user(i) + " is already split");
    }
    if (c.items.size() < 2) {
      throw DataError("client " + ds.external_user(i) + " (dense id " +
                      std::to_string(i) + ") has fewer than 2 positives");
    }
    std::size_t pick = 0;
    if (rule == HoldoutRule::kLatestTimestamp && !c.timestamps.empty()) {
      // Items are sorted ascending, so >= keeps the larger id on equal times.
      for (std::size_t k = 1; k < c.items.size(); ++k) {
        if (c.timestamps[k] >= c.timestamps[pick]) pick = k;
      }
    } else {
      auto rng = make_stream(seed, {0x5EEDULL, static_cast<std::uint64_t>(i)});
      pick = uniform_index(rng, c.items.size());
    }
    c.test_item = c.items[pick];
    c.items.erase(c.items.begin() + static_cast<std::ptrdiff_t>(pick));
    if (!c.timestamps.empty()) {
      c.timestamps.erase(c.timestamps.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  return ds;
}

NegativeSampler::NegativeSampler(const InteractionDataset& ds,
                                 int negatives_per_positive)
    : ds_(&ds), negatives_per_positive_(negatives_per_positive) {
  if (negatives_per_positive < 0) {
    throw ConfigError("negatives_per_positive must be non-negative");
  }
}

void NegativeSampler::hold_out(int client, std::vector<int> items) {
  if (client < 0 || client >= ds_->num_clients()) {
    throw ShapeError("hold_out: client " + std::to_string(client) + " out of range");
  }
  if (held_out_.empty()) held_out_.resize(ds_->num_clients());
  const ClientData& c = ds_->client(client);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  items.erase(std::remove_if(items.begin(), items.end(),
                             [&](int j) { return j == c.test_item || c.is_positive(j); }),
              items.end());
  held_out_[client] = std::move(items);
}

bool NegativeSampler::is_excluded(int client, int item) const {
  const ClientData& c = ds_->client(client);
  if (item == c.test_item || c.is_positive(item)) return true;
  if (held_out_.empty()) return false;
  const auto& h = held_out_[client];
  return std::binary_search(h.begin(), h.end(), item);
}

std::size_t NegativeSampler::excluded_count(int client) const {
  const ClientData& c = ds_->client(client);
  std::size_t n = c.items.size() + (c.has_test_item() ? 1 : 0);
  if (!held_out_.empty()) n += held_out_[client].size();
  return n;
}

std::vector<int> NegativeSampler::candidate_universe(int client) const {
  std::vector<int> out;
  out.reserve(ds_->num_items());
  for (int j = 0; j < ds_->num_items(); ++j) {
    if (!is_excluded(client, j)) out.push_back(j);
  }
  return out;
}

TrainingBatch NegativeSampler::sample(int client, int batch_size,
                                      std::mt19937_64& rng,
                                      Warnings* warnings) const {
  const ClientData& c = ds_->client(client);
  const std::size_t wanted = c.items.size() * negatives_per_positive_;
  TrainingBatch batch;
  batch.items.reserve(c.items.size() + wanted);
  for (int j : c.items) {
    batch.items.push_back(j);
    batch.labels.push_back(1.0f);
  }

  // Rejection sampling is cheap when positives are sparse; fall back to the
  // explicit universe otherwise.
  const std::size_t excluded = excluded_count(client);
  const std::size_t universe = static_cast<std::size_t>(ds_->num_items()) - excluded;
  if (universe == 0) {
    if (wanted > 0) {
      batch.sampled_with_replacement = true;
      warn(warnings, "client " + std::to_string(client) +
                         ": candidate universe is empty; no negatives sampled");
    }
  } else if (universe < wanted) {
    batch.sampled_with_replacement = true;
    warn(warnings, "client " + std::to_string(client) +
                       ": fewer candidates than requested negatives; sampling "
                       "with replacement");
    const auto pool = candidate_universe(client);
    for (std::size_t k = 0; k < wanted; ++k) {
      batch.items.push_back(pool[uniform_index(rng, pool.size())]);
      batch.labels.push_back(0.0f);
    }
  } else if (excluded * 2 <= static_cast<std::size_t>(ds_->num_items())) {
    const std::size_t m = static_cast<std::size_t>(ds_->num_items());
    for (std::size_t k = 0; k < wanted; ++k) {
      int j;
      do {
        j = static_cast<int>(uniform_index(rng, m));
      } while (is_excluded(client, j));
      batch.items.push_back(j);
      batch.labels.push_back(0.0f);
    }
  } else {
    const auto pool = candidate_universe(client);
    for (std::size_t k = 0; k < wanted; ++k) {
      batch.items.push_back(pool[uniform_index(rng, pool.size())]);
      batch.labels.push_back(0.0f);
    }
  }

  // Shuffle jointly, then truncate.
  const std::size_t n = batch.items.size();
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(batch.items[i - 1], batch.items[j]);
    std::swap(batch.labels[i - 1], batch.labels[j]);
  }
  if (batch_size > 0 && n > static_cast<std::size_t>(batch_size)) {
    batch.items.resize(batch_size);
    batch.labels.resize(batch_size);
  }
  return batch;
}

std::vector<int> build_eval_candidates(const InteractionDataset& ds, int client,
                                       int num_negatives, std::uint64_t seed,
                                       Warnings* warnings) {
  const ClientData& c = ds.client(client);
  if (!c.has_test_item()) {
    throw DataError("client " + std::to_string(client) + " has no test item");
  }
  std::vector<int> pool;
  pool.reserve(ds.num_items());
  for (int j = 0; j < ds.num_items(); ++j) {
    if (j != c.test_item && !c.is_positive(j)) pool.push_back(j);
  }
  auto rng = make_stream(seed, {0xE7A1ULL, static_cast<std::uint64_t>(client)});
  std::vector<int> out;
  out.reserve(num_negatives + 1);
  out.push_back(c.test_item);
  if (static_cast<std::size_t>(num_negatives) <= pool.size()) {
    for (std::size_t idx : sample_without_replacement(rng, pool.size(), num_negatives)) {
      out.push_back(pool[idx]);
    }
  } else {
    warn(warnings, "client " + std::to_string(client) +
                       ": fewer non-interacted items than eval negatives; "
                       "sampling with replacement");
    for (int k = 0; k < num_negatives && !pool.empty(); ++k) {
      out.push_back(pool[uniform_index(rng, pool.size())]);
    }
  }
  return out;
}

}  // namespace fed3cr
