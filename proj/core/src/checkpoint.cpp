/* Copyright 2026 The Matrix Attention Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "mattn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mattn {

namespace {

constexpr char kMagic[4] = {'F', 'D', 'T', 'C'};

template <typename U>
void put_le(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) {
    throw CheckpointError("checkpoint: unexpected end of file");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensors(std::ostream& os, const std::vector<NamedTensor>& entries) {
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xFFFF) throw CheckpointError("checkpoint: name too long");
    if (e.dims.size() > 0xFF) throw CheckpointError("checkpoint: too many dims");
    std::size_t n = 1;
    for (auto d : e.dims) n *= d;
    if (n != e.data.size()) throw CheckpointError("checkpoint: dims do not match payload");
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) put_le<std::uint32_t>(os, d);
    for (double x : e.data) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(x));
  }
  if (!os) throw CheckpointError("checkpoint: write failed");
}

std::vector<NamedTensor> read_tensors(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("checkpoint: bad magic (expected FDTC)");
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(is);
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    e.name.resize(get_le<std::uint16_t>(is));
    if (!is.read(e.name.data(), static_cast<std::streamsize>(e.name.size()))) {
      throw CheckpointError("checkpoint: unexpected end of file");
    }
    const auto ndim = get_le<std::uint8_t>(is);
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      e.dims.push_back(get_le<std::uint32_t>(is));
      n *= e.dims.back();
    }
    e.data.resize(n);
    for (auto& x : e.data) x = std::bit_cast<double>(get_le<std::uint64_t>(is));
    out.push_back(std::move(e));
  }
  return out;
}

void save_tensors(const std::string& path, const std::vector<NamedTensor>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("checkpoint: cannot open '" + path + "' for writing");
  write_tensors(os, entries);
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open '" + path + "'");
  return read_tensors(is);
}

NamedTensor to_named(const std::string& name, const Mat& m) {
  NamedTensor t;
  t.name = name;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.assign(m.data().begin(), m.data().end());
  return t;
}

Mat to_mat(const NamedTensor& t) {
  if (t.dims.size() != 2) {
    throw CheckpointError("checkpoint: entry '" + t.name + "' is not 2-d");
  }
  return Mat(t.dims[0], t.dims[1], t.data);
}

void save_params(const std::string& path, const ParamSet& params) {
  std::vector<NamedTensor> entries;
  for (const auto& [name, p] : params) entries.push_back(to_named(name, p.value));
  save_tensors(path, entries);
}

ParamSet load_params(const std::string& path) {
  ParamSet ps;
  for (const auto& e : load_tensors(path)) ps.add(e.name, to_mat(e));
  return ps;
}

}  // namespace mattn
