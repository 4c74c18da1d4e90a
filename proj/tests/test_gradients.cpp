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

#include <string>
#include <vector>

#include "doctest.h"
#include "fed3cr/losses.hpp"
#include "fed3cr/model.hpp"
#include "support/fixtures.hpp"

using namespace fed3cr;
using fed3cr::testing::fixed_batch;
using fed3cr::testing::jitter;
using fed3cr::testing::pack;
using fed3cr::testing::unpack;

namespace {

struct Case {
  std::string name;
  ModelSpec spec;
  LossConfig loss;
};

std::vector<Case> all_cases() {
  std::vector<Case> cases;
  const EnhancementKind kinds[] = {EnhancementKind::kNone, EnhancementKind::kAce,
                                   EnhancementKind::kConsensusTransfer,
                                   EnhancementKind::kUnifiedTransfer};
  for (auto kind : kinds) {
    for (auto comp : {ComplementarityKind::kOrthogonal, ComplementarityKind::kL2Distance}) {
      for (auto mode : {TopOneMode::kSoftmax, TopOneMode::kLiteralRatio}) {
        for (bool sample : {false, true}) {
          Case c;
          c.spec.dim = 4;
          c.spec.num_items = 6;
          c.spec.enhancement = kind;
          c.spec.ace_init = AceInit::kIdentity;
          c.loss.beta_a = 0.7;
          c.loss.beta_o = 0.3;
          c.loss.complementarity = comp;
          c.loss.top_one_mode = mode;
          c.loss.consistency_sample = sample;
          c.name = to_string(kind) + "/" + to_string(comp) + "/" + to_string(mode) +
                   (sample ? "/sampled" : "/all-items");
          cases.push_back(c);
        }
      }
    }
  }
  for (auto kind : {EnhancementKind::kNone, EnhancementKind::kAce}) {
    Case c;
    c.spec.dim = 4;
    c.spec.num_items = 6;
    c.spec.enhancement = kind;
    c.spec.base = BaseModel::kFedMf;
    c.loss.consistency_enabled = false;
    c.loss.complementarity_enabled = false;
    c.name = "fedmf/" + to_string(kind);
    cases.push_back(c);
  }
  return cases;
}

GradCheckReport check_case(const Case& c, std::uint64_t seed) {
  ClientState<double> state = init_client<double>(seed, 0, c.spec);
  jitter(state, seed, 0.3);
  const std::vector<int> positives{0, 2, 3};
  const TrainingBatch batch = fixed_batch({0, 2, 3, 1, 4}, {1, 1, 1, 0, 0});

  auto loss_at = [&](const Matrix& params) {
    ClientState<double> s = state;
    unpack(params, s);
    const auto trace = forward(s, positives, c.spec);
    return total_loss(s, trace, batch, positives, c.spec, c.loss).total;
  };
  const auto trace = forward(state, positives, c.spec);
  auto grads = ClientGradients<double>::zeros_like(state);
  total_loss(state, trace, batch, positives, c.spec, c.loss, &grads);
  return grad_check(loss_at, pack(state), pack(grads), 1e-5, 1e-4);
}

}  // namespace

TEST_CASE("total objective gradient matches central differences for every variant") {
  for (const auto& c : all_cases()) {
    for (std::uint64_t seed : {3u, 11u}) {
      const auto report = check_case(c, seed);
      INFO(c.name, " seed=", seed, " max_rel=", report.max_rel_error,
           " index=", report.worst_index, " analytic=", report.worst_analytic,
           " numeric=", report.worst_numeric);
      CHECK(report.passed);
      CHECK(report.entries_checked > 0);
    }
  }
}

// At the zero-init point the enhanced rows have norm ~1e-7, so the cosine
// terms are sharply curved and a fixed-step difference is inaccurate. The
// truncation error must still shrink quadratically with the step.
TEST_CASE("zero-init point: difference error converges at second order") {
  ModelSpec spec;
  spec.dim = 4;
  spec.num_items = 6;
  LossConfig loss;
  loss.beta_a = 1.0;
  loss.beta_o = 1.0;
  ClientState<double> state = init_client<double>(5, 0, spec);
  const std::vector<int> positives{1, 4};
  const TrainingBatch batch = fixed_batch({1, 4, 0, 5}, {1, 1, 0, 0});
  auto loss_at = [&](const Matrix& params) {
    ClientState<double> s = state;
    unpack(params, s);
    return total_loss(s, forward(s, positives, spec), batch, positives, spec, loss).total;
  };
  auto grads = ClientGradients<double>::zeros_like(state);
  total_loss(state, forward(state, positives, spec), batch, positives, spec, loss, &grads);
  const auto coarse = grad_check(loss_at, pack(state), pack(grads), 1e-6, 1e-4);
  const auto fine = grad_check(loss_at, pack(state), pack(grads), 1e-7, 1e-4);
  INFO("coarse=", coarse.max_rel_error, " fine=", fine.max_rel_error);
  CHECK(fine.max_rel_error < coarse.max_rel_error / 50.0);
  CHECK(fine.max_rel_error < 1e-3);
}
