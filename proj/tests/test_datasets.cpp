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
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fed3cr/datasets.hpp"
#include "fed3cr/random.hpp"
#include "fed3cr/toy.hpp"
#include "support/fixtures.hpp"

using namespace fed3cr;
using fed3cr::testing::TempDir;
using fed3cr::testing::write_file;

namespace {

std::vector<RawInteraction> parse(const std::string& text, DataFormat f) {
  std::istringstream in(text);
  return parse_interactions(in, f);
}

// One user per entry, items "i0".."i<k-1>" with increasing timestamps.
InteractionDataset uniform_users(int users, int items_each, int extra_items) {
  std::vector<RawInteraction> recs;
  std::int64_t t = 1;
  for (int u = 0; u < users; ++u) {
    for (int j = 0; j < items_each; ++j) {
      recs.push_back({"u" + std::to_string(u), "i" + std::to_string((u + j) % (items_each + extra_items)), 1.0, t++});
    }
  }
  // Make sure every item id exists.
  for (int j = 0; j < items_each + extra_items; ++j) recs.push_back({"pad", "i" + std::to_string(j), 1.0, t++});
  return build_dataset(recs, 1);
}

}  // namespace

TEST_CASE("three-line file with min_interactions=1 gives 2 clients and 2 items") {
  TempDir dir("ds");
  write_file(dir / "three.tsv", "user\titem\trating\ttimestamp\nu1\ta\t5\t10\nu1\tb\t3\t11\nu2\ta\t4\t12\n");
  const auto ds = load_dataset(dir / "three.tsv", DataFormat::kTsv, 1);
  CHECK(ds.num_clients() == 2);
  CHECK(ds.num_items() == 2);
  CHECK(ds.num_interactions() == 3);
  const auto stats = compute_stats(ds);
  CHECK(stats.avg == doctest::Approx(1.5));
  CHECK(stats.sparsity == doctest::Approx(1.0 - 3.0 / 4.0));
  CHECK(stats.to_json() == R"({"clients":2,"items":2,"interactions":3,"avg":1.5,"sparsity":0.25})");
}

TEST_CASE("every user filtered out is a configuration error") {
  TempDir dir("ds");
  write_file(dir / "ones.dat", "1::10::5::100\n2::11::4::101\n3::12::3::102\n");
  CHECK_THROWS_AS(load_dataset(dir / "ones.dat", DataFormat::kMovieLensDat, 5), ConfigError);
}

TEST_CASE("malformed lines report their line number") {
  try {
    parse("1::10::5::100\n2::11::4::101\n3::12::five::102\n", DataFormat::kMovieLensDat);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse("7\n", DataFormat::kMovieLensDat), ParseError);
  CHECK_THROWS_AS(parse("user,item\nu1\n", DataFormat::kCsv), ParseError);
  CHECK_THROWS_AS(parse("a,b\nu1,i1\n", DataFormat::kCsv), ParseError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/ratings.dat", DataFormat::kMovieLensDat, 1), DataError);
}

TEST_CASE("csv with optional columns omitted") {
  const auto recs = parse("user,item\nu1,i1\nu1,i2\n", DataFormat::kCsv);
  REQUIRE(recs.size() == 2);
  CHECK_FALSE(recs[0].rating.has_value());
  CHECK_FALSE(recs[0].timestamp.has_value());
  CHECK(recs[1].item_id == "i2");
}

TEST_CASE("ratings binarize and duplicates collapse") {
  std::vector<RawInteraction> recs{
      {"u", "a", 0.5, 1}, {"u", "a", 5.0, 7}, {"u", "b", 1.0, 3}, {"v", "a", 2.0, 2}, {"v", "b", 1.0, 4}};
  const auto ds = build_dataset(recs, 1);
  CHECK(ds.num_interactions() == 4);
  const int u = *ds.dense_user("u");
  CHECK(ds.client(u).items.size() == 2);
  // The duplicate keeps the latest timestamp, so `a` (t=7) is held out.
  const auto split = leave_one_out_split(ds, 1);
  CHECK(split.external_item(split.client(u).test_item) == "a");
}

TEST_CASE("leave-one-out holds out the latest timestamp") {
  std::vector<RawInteraction> recs{{"u", "a", 1.0, 1}, {"u", "b", 1.0, 9}};
  const auto ds = leave_one_out_split(build_dataset(recs, 1), 3);
  const auto& c = ds.client(0);
  CHECK(ds.external_item(c.test_item) == "b");
  REQUIRE(c.items.size() == 1);
  CHECK(ds.external_item(c.items[0]) == "a");
  CHECK_FALSE(c.is_positive(c.test_item));
}

TEST_CASE("equal timestamps go to the larger dense id") {
  std::vector<RawInteraction> recs{{"u", "a", 1.0, 5}, {"u", "b", 1.0, 5}, {"u", "c", 1.0, 2}};
  const auto ds = leave_one_out_split(build_dataset(recs, 1), 3);
  CHECK(ds.client(0).test_item == std::max(*ds.dense_item("a"), *ds.dense_item("b")));
}

TEST_CASE("without timestamps the held-out item is seeded") {
  std::vector<RawInteraction> recs;
  for (int u = 0; u < 30; ++u)
    for (int j = 0; j < 6; ++j) recs.push_back({"u" + std::to_string(u), "i" + std::to_string(j), std::nullopt, std::nullopt});
  const auto base = build_dataset(recs, 1);
  const auto a = leave_one_out_split(base, 11);
  const auto b = leave_one_out_split(base, 11);
  const auto c = leave_one_out_split(base, 12);
  bool differs = false;
  for (int i = 0; i < base.num_clients(); ++i) {
    CHECK(a.client(i).test_item == b.client(i).test_item);
    differs |= a.client(i).test_item != c.client(i).test_item;
  }
  CHECK(differs);
  const auto r = leave_one_out_split(base, 11, HoldoutRule::kRandom);
  CHECK(r.is_split());
}

TEST_CASE("a client with a single positive cannot be split") {
  std::vector<RawInteraction> recs{{"lonely", "a", 1.0, 1}, {"u", "a", 1.0, 2}, {"u", "b", 1.0, 3}};
  try {
    leave_one_out_split(build_dataset(recs, 1), 1);
    FAIL("expected a split error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("lonely") != std::string::npos);
  }
}

TEST_CASE("split preserves totals and remapping round-trips") {
  const auto raw = build_dataset(generate_toy_records(ToyDatasetSpec{}), 2);
  const auto ds = leave_one_out_split(raw, 5);
  long long total = 0;
  for (const auto& c : ds.clients()) total += static_cast<long long>(c.items.size()) + 1;
  CHECK(total == raw.num_interactions());
  CHECK(total == ds.num_interactions());
  for (int i = 0; i < ds.num_clients(); ++i) CHECK(*ds.dense_user(ds.external_user(i)) == i);
  for (int j = 0; j < ds.num_items(); ++j) CHECK(*ds.dense_item(ds.external_item(j)) == j);
  CHECK_FALSE(ds.dense_user("nobody").has_value());
}

TEST_CASE("batch holds every positive and four negatives each") {
  const auto ds = leave_one_out_split(uniform_users(3, 4, 30), 1);
  NegativeSampler sampler(ds, 4);
  const int client = *ds.dense_user("u0");
  REQUIRE(ds.client(client).items.size() == 3);
  auto rng = make_stream(1, {});
  Warnings w;
  const auto batch = sampler.sample(client, 2048, rng, &w);
  CHECK(batch.size() == 15);
  CHECK(std::count(batch.labels.begin(), batch.labels.end(), 1.0f) == 3);
  CHECK(w.empty());
  const auto& c = ds.client(client);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (batch.labels[k] == 0.0f) {
      CHECK_FALSE(c.is_positive(batch.items[k]));
      CHECK(batch.items[k] != c.test_item);
    }
  }
  auto small = make_stream(1, {});
  CHECK(sampler.sample(client, 5, small).size() == 5);
}

TEST_CASE("exhausted universe yields no negatives and a warning") {
  std::vector<RawInteraction> recs;
  for (int j = 0; j < 5; ++j) recs.push_back({"u", "i" + std::to_string(j), 1.0, j});
  const auto ds = leave_one_out_split(build_dataset(recs, 1), 1);
  REQUIRE(ds.client(0).test_item == *ds.dense_item("i4"));
  NegativeSampler sampler(ds, 4);
  auto rng = make_stream(2, {});
  Warnings w;
  const auto batch = sampler.sample(0, 2048, rng, &w);
  CHECK(batch.size() == 4);
  CHECK(batch.sampled_with_replacement);
  CHECK(w.contains("candidate universe is empty"));
}

TEST_CASE("small universe samples with replacement and warns") {
  const auto ds = leave_one_out_split(uniform_users(1, 4, 2), 1);
  NegativeSampler sampler(ds, 4);
  const int client = *ds.dense_user("u0");
  auto rng = make_stream(3, {});
  Warnings w;
  const auto batch = sampler.sample(client, 2048, rng, &w);
  CHECK(batch.sampled_with_replacement);
  CHECK(w.contains("with replacement"));
  CHECK(batch.size() == 3 + 12);
  for (std::size_t k = 0; k < batch.size(); ++k)
    if (batch.labels[k] == 0.0f) CHECK_FALSE(sampler.is_excluded(client, batch.items[k]));
}

TEST_CASE("batches are reproducible for a fixed stream") {
  const auto ds = leave_one_out_split(uniform_users(4, 6, 40), 1);
  NegativeSampler sampler(ds, 4);
  auto r1 = make_stream(9, {1, 2});
  auto r2 = make_stream(9, {1, 2});
  const auto a = sampler.sample(1, 2048, r1);
  const auto b = sampler.sample(1, 2048, r2);
  CHECK(a.items == b.items);
  CHECK(a.labels == b.labels);
}

TEST_CASE("held-out items leave the negative universe") {
  const auto ds = leave_one_out_split(uniform_users(2, 4, 20), 1);
  NegativeSampler sampler(ds, 4);
  const auto before = sampler.candidate_universe(0);
  std::vector<int> hold(before.begin(), before.begin() + 5);
  sampler.hold_out(0, hold);
  const auto after = sampler.candidate_universe(0);
  CHECK(after.size() == before.size() - 5);
  for (int j : hold) {
    CHECK(sampler.is_excluded(0, j));
    CHECK(std::find(after.begin(), after.end(), j) == after.end());
  }
  for (int s = 0; s < 20; ++s) {
    auto rng = make_stream(s, {});
    const auto batch = sampler.sample(0, 2048, rng);
    for (std::size_t k = 0; k < batch.size(); ++k)
      if (batch.labels[k] == 0.0f) CHECK(std::find(hold.begin(), hold.end(), batch.items[k]) == hold.end());
  }
}

TEST_CASE("evaluation candidates: 99 negatives, test item once, deterministic") {
  const auto ds = make_toy_dataset(ToyDatasetSpec{});
  for (int i = 0; i < ds.num_clients(); ++i) {
    const auto cand = build_eval_candidates(ds, i, 99, 42);
    REQUIRE(cand.size() == 100);
    const auto& c = ds.client(i);
    CHECK(std::count(cand.begin(), cand.end(), c.test_item) == 1);
    const std::set<int> uniq(cand.begin(), cand.end());
    CHECK(uniq.size() == cand.size());
    // Exhaustive set intersection with the train positives.
    for (int j : c.items) CHECK(uniq.count(j) == 0);
    CHECK(build_eval_candidates(ds, i, 99, 42) == cand);
  }
  CHECK(build_eval_candidates(ds, 0, 99, 43) != build_eval_candidates(ds, 0, 99, 42));
}

TEST_CASE("too few non-interacted items for evaluation warns") {
  const auto ds = leave_one_out_split(uniform_users(1, 4, 2), 1);
  Warnings w;
  const auto cand = build_eval_candidates(ds, *ds.dense_user("u0"), 99, 1, &w);
  CHECK(cand.size() == 100);
  CHECK_FALSE(w.empty());
}

TEST_CASE("toy generator plants block structure") {
  ToyDatasetSpec spec;
  const auto recs = generate_toy_records(spec);
  CHECK(recs.size() == static_cast<std::size_t>(spec.clients * spec.positives_per_client));
  int in_block = 0;
  for (const auto& r : recs) {
    const int u = std::stoi(r.user_id.substr(1));
    const int j = std::stoi(r.item_id.substr(1));
    in_block += toy_user_block(spec, u) == toy_item_block(spec, j);
  }
  // 16 of 20 forced in-block, plus uniform picks landing in-block by chance.
  CHECK(in_block >= static_cast<int>(0.8 * recs.size()));
  std::ostringstream tsv;
  write_interactions_tsv(recs, tsv);
  std::istringstream in(tsv.str());
  CHECK(parse_interactions(in, DataFormat::kTsv).size() == recs.size());
  CHECK_THROWS_AS([] { ToyDatasetSpec bad; bad.items = 3; bad.blocks = 4; bad.validate(); }(), ConfigError);
}
