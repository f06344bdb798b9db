// Copyright 2026 The SD-Net Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sdnet/io.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace sdnet {

namespace {

constexpr std::array<char, 4> kSdt1Magic = {'S', 'D', 'T', '1'};
constexpr std::uint8_t kDtypeF32 = 0;
// Guards against absurd allocations from corrupted headers.
constexpr std::uint32_t kMaxRank = 8;

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("truncated input while reading ") + what);
  }
}

}  // namespace

namespace le {

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint16_t get_u16(std::istream& in, const char* what) {
  unsigned char b[2];
  read_exact(in, reinterpret_cast<char*>(b), 2, what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace le

void write_sdt1(std::ostream& out, const Tensor<float>& tensor) {
  out.write(kSdt1Magic.data(), kSdt1Magic.size());
  le::put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t e : tensor.shape()) le::put_u32(out, static_cast<std::uint32_t>(e));
  out.put(static_cast<char>(kDtypeF32));
  for (float v : tensor.values()) le::put_u32(out, std::bit_cast<std::uint32_t>(v));
}

Tensor<float> read_sdt1(std::istream& in) {
  std::array<char, 4> magic{};
  read_exact(in, magic.data(), magic.size(), "SDT1 magic");
  if (magic != kSdt1Magic) {
    throw FormatError("bad tensor magic: expected 'SDT1', got '" +
                      std::string(magic.data(), magic.size()) + "'");
  }
  const std::uint32_t rank = le::get_u32(in, "SDT1 rank");
  if (rank > kMaxRank) throw FormatError("SDT1 rank " + std::to_string(rank) + " exceeds limit");
  Shape shape(rank);
  for (auto& e : shape) e = le::get_u32(in, "SDT1 extent");
  char dtype = 0;
  read_exact(in, &dtype, 1, "SDT1 dtype");
  if (static_cast<std::uint8_t>(dtype) != kDtypeF32) {
    throw FormatError("unsupported SDT1 dtype code " +
                      std::to_string(static_cast<unsigned>(static_cast<std::uint8_t>(dtype))));
  }
  const std::size_t n = shape_numel(shape);
  std::vector<char> raw(n * 4);
  read_exact(in, raw.data(), raw.size(), "SDT1 elements");
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(raw.data() + 4 * i);
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                               (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    data[i] = std::bit_cast<float>(bits);
  }
  return Tensor<float>(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor<float>& tensor) {
  atomic_write(path, [&](std::ostream& out) { write_sdt1(out, tensor); });
}

Tensor<float> load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_sdt1(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace sdnet
