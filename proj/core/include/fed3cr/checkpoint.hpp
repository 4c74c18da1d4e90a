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
#include <string>
#include <string_view>
#include <vector>

#include "fed3cr/model.hpp"

namespace fed3cr {

// Binary layout:
//   8 bytes   magic "F3CRCKP1"
//   8 bytes   little-endian uint64 header length H
//   H bytes   UTF-8 JSON header: {"dtype":"f32"|"f64","seed":..,"round":..,
//             "client_id":..,"iterations":..,
//             "net_widths":[..],"net_output":..,
//             "blocks":[{"name":..,"shape":[..]}, ...]}
//   payload   every block's values, in header order, as flat little-endian
//             IEEE floats of the header dtype (f32 for float state).

struct CheckpointMeta {
  std::uint64_t seed = 0;
  int round = 0;
  int client_id = -1;
  long long iterations = 0;  // local SGD steps, client checkpoints only
};

template <typename T>
struct NamedBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> values;
};

template <typename T>
struct Checkpoint {
  CheckpointMeta meta;
  std::vector<int> net_widths;
  int net_output = 0;
  std::vector<NamedBlock<T>> blocks;

  const NamedBlock<T>& block(std::string_view name) const;
  bool has_block(std::string_view name) const;
};

template <typename T>
std::string encode_checkpoint(const Checkpoint<T>& ckpt);

// Throws ParseError on malformed bytes or a dtype that does not match T.
template <typename T>
Checkpoint<T> decode_checkpoint(std::string_view bytes);

// Block names used for client state and uploads.
inline constexpr std::string_view kUserBlock = "user";
inline constexpr std::string_view kGlobalTableBlock = "global_table";
inline constexpr std::string_view kPersonalTableBlock = "personal_table";
inline constexpr std::string_view kTransferNetPrefix = "transfer_net.";

template <typename T>
std::string encode_client_state(const ClientState<T>& state, const CheckpointMeta& meta);

template <typename T>
ClientState<T> decode_client_state(std::string_view bytes, CheckpointMeta* meta = nullptr);

// What leaves a client after LocalUpdate: C_i and theta_i only.
template <typename T>
struct ClientUpload {
  BasicMatrix<T> global_table;
  TransferNet<T> net;
};

template <typename T>
std::string encode_upload(const ClientUpload<T>& upload, const CheckpointMeta& meta);

template <typename T>
ClientUpload<T> decode_upload(std::string_view bytes, CheckpointMeta* meta = nullptr);

// Block names present in an encoded payload (header only).
std::vector<std::string> checkpoint_block_names(std::string_view bytes);

void write_bytes(const std::filesystem::path& path, std::string_view bytes);
std::string read_bytes(const std::filesystem::path& path);

}  // namespace fed3cr
