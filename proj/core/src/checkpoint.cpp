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

#include "fed3cr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "fed3cr/errors.hpp"

namespace fed3cr {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

constexpr char kMagic[8] = {'F', '3', 'C', 'R', 'C', 'K', 'P', '1'};

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

struct RawHeader {
  nlohmann::json header;
  std::string_view payload;
};

RawHeader split_header(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw ParseError("checkpoint: bad magic", 0);
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  if (len > bytes.size() - 16) throw ParseError("checkpoint: truncated header", 0);
  RawHeader out;
  try {
    out.header = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: bad header json: ") + e.what(), 0);
  }
  out.payload = bytes.substr(16 + len);
  return out;
}

template <typename T>
NamedBlock<T> matrix_block(std::string_view name, const BasicMatrix<T>& m) {
  return {std::string(name), {m.rows(), m.cols()}, m.values()};
}

template <typename T>
NamedBlock<T> vector_block(std::string_view name, const BasicVector<T>& v) {
  return {std::string(name), {v.dim()}, v.values()};
}

template <typename T>
void append_net_blocks(const TransferNet<T>& net, std::vector<NamedBlock<T>>& blocks) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::string base = std::string(kTransferNetPrefix) + "layer" + std::to_string(l);
    blocks.push_back(matrix_block(base + ".weight", net.weights[l]));
    blocks.push_back(vector_block(base + ".bias", net.biases[l]));
  }
}

template <typename T>
TransferNet<T> net_from_checkpoint(const Checkpoint<T>& ck) {
  TransferNet<T> net = make_transfer_net<T>(ck.net_widths, ck.net_output);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::string base = std::string(kTransferNetPrefix) + "layer" + std::to_string(l);
    const auto& w = ck.block(base + ".weight");
    const auto& b = ck.block(base + ".bias");
    if (w.values.size() != net.weights[l].size() || b.values.size() != net.biases[l].size()) {
      throw ParseError("checkpoint: transfer net block size mismatch at layer " +
                           std::to_string(l),
                       0);
    }
    net.weights[l] = BasicMatrix<T>(net.weights[l].rows(), net.weights[l].cols(), w.values);
    net.biases[l] = BasicVector<T>(b.values);
  }
  return net;
}

template <typename T>
BasicMatrix<T> matrix_from_block(const NamedBlock<T>& b) {
  if (b.shape.size() != 2) throw ParseError("checkpoint: block " + b.name + " is not 2-D", 0);
  return BasicMatrix<T>(b.shape[0], b.shape[1], b.values);
}

}  // namespace

template <typename T>
const NamedBlock<T>& Checkpoint<T>::block(std::string_view name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw ParseError("checkpoint: missing block " + std::string(name), 0);
}

template <typename T>
bool Checkpoint<T>::has_block(std::string_view name) const {
  for (const auto& b : blocks)
    if (b.name == name) return true;
  return false;
}

template <typename T>
std::string encode_checkpoint(const Checkpoint<T>& ckpt) {
  nlohmann::ordered_json header;
  header["dtype"] = dtype_name<T>();
  header["seed"] = ckpt.meta.seed;
  header["round"] = ckpt.meta.round;
  header["client_id"] = ckpt.meta.client_id;
  header["iterations"] = ckpt.meta.iterations;
  header["net_widths"] = ckpt.net_widths;
  header["net_output"] = ckpt.net_output;
  header["blocks"] = nlohmann::ordered_json::array();
  std::size_t total = 0;
  for (const auto& b : ckpt.blocks) {
    if (b.values.size() != product(b.shape)) {
      throw ShapeError("checkpoint: block " + b.name + " size does not match its shape");
    }
    header["blocks"].push_back({{"name", b.name}, {"shape", b.shape}});
    total += b.values.size();
  }
  const std::string h = header.dump();
  std::string out;
  out.reserve(16 + h.size() + total * sizeof(T));
  out.append(kMagic, 8);
  const std::uint64_t len = h.size();
  out.append(reinterpret_cast<const char*>(&len), 8);
  out += h;
  for (const auto& b : ckpt.blocks) {
    out.append(reinterpret_cast<const char*>(b.values.data()), b.values.size() * sizeof(T));
  }
  return out;
}

template <typename T>
Checkpoint<T> decode_checkpoint(std::string_view bytes) {
  RawHeader raw = split_header(bytes);
  const auto& h = raw.header;
  Checkpoint<T> ck;
  try {
    if (h.at("dtype").get<std::string>() != dtype_name<T>()) {
      throw ParseError("checkpoint: dtype " + h.at("dtype").get<std::string>() +
                           " does not match requested precision",
                       0);
    }
    ck.meta.seed = h.at("seed").get<std::uint64_t>();
    ck.meta.round = h.at("round").get<int>();
    ck.meta.client_id = h.at("client_id").get<int>();
    ck.meta.iterations = h.at("iterations").get<long long>();
    ck.net_widths = h.at("net_widths").get<std::vector<int>>();
    ck.net_output = h.at("net_output").get<int>();
    std::size_t offset = 0;
    for (const auto& jb : h.at("blocks")) {
      NamedBlock<T> b;
      b.name = jb.at("name").get<std::string>();
      b.shape = jb.at("shape").get<std::vector<std::size_t>>();
      const std::size_t n = product(b.shape);
      if ((offset + n) * sizeof(T) > raw.payload.size()) {
        throw ParseError("checkpoint: payload truncated in block " + b.name, 0);
      }
      b.values.resize(n);
      std::memcpy(b.values.data(), raw.payload.data() + offset * sizeof(T), n * sizeof(T));
      offset += n;
      ck.blocks.push_back(std::move(b));
    }
    if (offset * sizeof(T) != raw.payload.size()) {
      throw ParseError("checkpoint: trailing payload bytes", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: bad header: ") + e.what(), 0);
  }
  return ck;
}

std::vector<std::string> checkpoint_block_names(std::string_view bytes) {
  RawHeader raw = split_header(bytes);
  std::vector<std::string> names;
  for (const auto& jb : raw.header.at("blocks")) names.push_back(jb.at("name").get<std::string>());
  return names;
}

template <typename T>
std::string encode_client_state(const ClientState<T>& state, const CheckpointMeta& meta) {
  Checkpoint<T> ck;
  ck.meta = meta;
  ck.meta.client_id = state.client_id;
  ck.meta.iterations = state.iterations;
  ck.net_widths = state.net.widths;
  ck.net_output = state.net.output_dim;
  ck.blocks.push_back(vector_block(kUserBlock, state.user));
  ck.blocks.push_back(matrix_block(kGlobalTableBlock, state.global_table));
  ck.blocks.push_back(matrix_block(kPersonalTableBlock, state.personal_table));
  append_net_blocks(state.net, ck.blocks);
  return encode_checkpoint(ck);
}

template <typename T>
ClientState<T> decode_client_state(std::string_view bytes, CheckpointMeta* meta) {
  Checkpoint<T> ck = decode_checkpoint<T>(bytes);
  ClientState<T> s;
  s.client_id = ck.meta.client_id;
  s.user = BasicVector<T>(ck.block(kUserBlock).values);
  s.global_table = matrix_from_block(ck.block(kGlobalTableBlock));
  s.personal_table = matrix_from_block(ck.block(kPersonalTableBlock));
  s.net = net_from_checkpoint(ck);
  s.iterations = ck.meta.iterations;
  if (meta != nullptr) *meta = ck.meta;
  return s;
}

template <typename T>
std::string encode_upload(const ClientUpload<T>& upload, const CheckpointMeta& meta) {
  Checkpoint<T> ck;
  ck.meta = meta;
  ck.net_widths = upload.net.widths;
  ck.net_output = upload.net.output_dim;
  ck.blocks.push_back(matrix_block(kGlobalTableBlock, upload.global_table));
  append_net_blocks(upload.net, ck.blocks);
  return encode_checkpoint(ck);
}

template <typename T>
ClientUpload<T> decode_upload(std::string_view bytes, CheckpointMeta* meta) {
  Checkpoint<T> ck = decode_checkpoint<T>(bytes);
  ClientUpload<T> up;
  up.global_table = matrix_from_block(ck.block(kGlobalTableBlock));
  up.net = net_from_checkpoint(ck);
  if (meta != nullptr) *meta = ck.meta;
  return up;
}

void write_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

#define FED3CR_INSTANTIATE_CKPT(T)                                                       \
  template struct Checkpoint<T>;                                                        \
  template std::string encode_checkpoint<T>(const Checkpoint<T>&);                      \
  template Checkpoint<T> decode_checkpoint<T>(std::string_view);                        \
  template std::string encode_client_state<T>(const ClientState<T>&,                    \
                                              const CheckpointMeta&);                   \
  template ClientState<T> decode_client_state<T>(std::string_view, CheckpointMeta*);    \
  template std::string encode_upload<T>(const ClientUpload<T>&, const CheckpointMeta&); \
  template ClientUpload<T> decode_upload<T>(std::string_view, CheckpointMeta*);

FED3CR_INSTANTIATE_CKPT(float)
FED3CR_INSTANTIATE_CKPT(double)

#undef FED3CR_INSTANTIATE_CKPT

}  // namespace fed3cr
