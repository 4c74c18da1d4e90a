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

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <vector>

#include "fed3cr/checkpoint.hpp"
#include "fed3cr/evaluation.hpp"
#include "fed3cr/federation.hpp"
#include "fed3cr/losses.hpp"
#include "fed3cr/random.hpp"
#include "fed3cr/toy.hpp"

using namespace fed3cr;

namespace {

BasicMatrix<float> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  auto rng = make_stream(seed, {r, c});
  std::normal_distribution<float> n(0.0f, 0.1f);
  BasicMatrix<float> m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

HyperParams toy_hp(int dim) {
  HyperParams hp;
  hp.dim = dim;
  hp.local_iterations = 5;
  hp.batch_size = 2048;
  hp.layers = {2, 4};
  hp.ace_init = AceInit::kIdentity;
  return hp;
}

}  // namespace

static void BM_Matmul(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = random_matrix(n, 64, 1);
  const auto b = random_matrix(64, 64, 2);
  for (auto _ : st) benchmark::DoNotOptimize(matmul(a, b));
  st.SetItemsProcessed(st.iterations() * static_cast<long long>(n) * 64 * 64);
}
BENCHMARK(BM_Matmul)->Arg(200)->Arg(3706);

static void BM_ForwardAndLoss(benchmark::State& st) {
  const int dim = static_cast<int>(st.range(0));
  const auto ds = make_toy_dataset(ToyDatasetSpec{});
  const auto variant = VariantConfig::from_label("Fed3CR");
  const auto hp = toy_hp(dim);
  const auto spec = make_model_spec(hp, variant, ds.num_items());
  const auto state = init_client<float>(1, 0, spec);
  const auto& items = ds.client(0).items;
  const NegativeSampler sampler(ds, 4);
  auto rng = make_stream(1, {0});
  const auto batch = sampler.sample(0, 2048, rng);
  const auto loss = make_loss_config(hp, variant);
  auto grads = ClientGradients<float>::zeros_like(state);
  for (auto _ : st) {
    const auto trace = forward(state, items, spec);
    benchmark::DoNotOptimize(total_loss(state, trace, batch, items, spec, loss, &grads));
  }
}
BENCHMARK(BM_ForwardAndLoss)->Arg(16)->Arg(32);

static void BM_LocalUpdate(benchmark::State& st) {
  const auto ds = make_toy_dataset(ToyDatasetSpec{});
  const auto variant = VariantConfig::from_label("Fed3CR");
  const auto hp = toy_hp(16);
  const auto spec = make_model_spec(hp, variant, ds.num_items());
  const auto server = init_server<float>(hp.seed, spec);
  const NegativeSampler sampler(ds, hp.negatives_per_positive);
  auto state = init_client<float>(hp.seed, 0, spec);
  for (auto _ : st) {
    benchmark::DoNotOptimize(
        local_update(state, server.consensus, server.net, ds, sampler, hp, variant, 0));
  }
}
BENCHMARK(BM_LocalUpdate)->Unit(benchmark::kMillisecond);

static void BM_UploadRoundTrip(benchmark::State& st) {
  const auto hp = toy_hp(16);
  const auto variant = VariantConfig::from_label("Fed3CR");
  const auto spec = make_model_spec(hp, variant, static_cast<int>(st.range(0)));
  const auto server = init_server<float>(1, spec);
  ClientUpload<float> up;
  up.global_table = server.consensus;
  up.net = server.net;
  for (auto _ : st) {
    const auto bytes = encode_upload(up, CheckpointMeta{});
    benchmark::DoNotOptimize(decode_upload<float>(bytes));
  }
}
BENCHMARK(BM_UploadRoundTrip)->Arg(200)->Arg(3706);

static void BM_Rbo(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  std::vector<int> a(n), b(n);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.rbegin(), b.rend(), 0);
  for (auto _ : st) benchmark::DoNotOptimize(rbo_truncated(a, b, 0.99));
}
BENCHMARK(BM_Rbo)->Arg(20)->Arg(200);
BENCHMARK_MAIN();
