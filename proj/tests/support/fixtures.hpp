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
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fed3cr/datasets.hpp"
#include "fed3cr/losses.hpp"
#include "fed3cr/model.hpp"
#include "fed3cr/random.hpp"

namespace fed3cr::testing {

// Every trainable scalar of a client, in a fixed order: u, C, V, theta.
inline Matrix pack(const ClientState<double>& s) {
  std::vector<double> flat(s.user.values());
  flat.insert(flat.end(), s.global_table.values().begin(), s.global_table.values().end());
  flat.insert(flat.end(), s.personal_table.values().begin(), s.personal_table.values().end());
  const auto net = s.net.flatten();
  flat.insert(flat.end(), net.begin(), net.end());
  const std::size_t n = flat.size();
  return Matrix(1, n, std::move(flat));
}

inline void unpack(const Matrix& m, ClientState<double>& s) {
  auto src = m.span();
  std::size_t off = 0;
  auto take = [&](std::span<double> dst) {
    for (auto& v : dst) v = src[off++];
  };
  take(s.user.span());
  take(s.global_table.span());
  take(s.personal_table.span());
  std::vector<double> net(src.begin() + static_cast<std::ptrdiff_t>(off), src.end());
  s.net.assign_flat(net);
}

inline Matrix pack(const ClientGradients<double>& g) {
  ClientState<double> s;
  s.user = g.user;
  s.global_table = g.global_table;
  s.personal_table = g.personal_table;
  s.net = g.net;
  return pack(s);
}

// Adds N(0, scale) noise to every parameter so nothing sits at a symmetric
// point (zero-init last layers, identical rows).
inline void jitter(ClientState<double>& s, std::uint64_t seed, double scale) {
  auto rng = make_stream(seed, {0x717ULL});
  std::normal_distribution<double> normal(0.0, scale);
  Matrix flat = pack(s);
  for (auto& v : flat.span()) v += normal(rng);
  unpack(flat, s);
}

// Six items, one client: positives {0, 2, 3}, test item 5.
inline InteractionDataset tiny_dataset() {
  std::vector<RawInteraction> recs;
  const int items[] = {0, 2, 3, 5};
  std::int64_t t = 1;
  for (int j : items) recs.push_back({"u0", "i" + std::to_string(j), 1.0, t++});
  // A second user introduces the remaining item ids.
  for (int j : {1, 4}) recs.push_back({"u1", "i" + std::to_string(j), 1.0, t++});
  return build_dataset(recs, 1);
}

inline TrainingBatch fixed_batch(std::vector<int> items, std::vector<float> labels) {
  TrainingBatch b;
  b.items = std::move(items);
  b.labels = std::move(labels);
  return b;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fed3cr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace fed3cr::testing
