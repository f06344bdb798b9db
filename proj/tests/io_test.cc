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

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "sdnet/io.h"
#include "sdnet/model.h"
#include "sdnet/trainer.h"

using namespace sdnet;
namespace fs = std::filesystem;

namespace {

std::string sdt1_bytes(const Tensor<float>& t) {
  std::ostringstream out(std::ios::binary);
  write_sdt1(out, t);
  return out.str();
}

// Writes a checkpoint from an explicit (name, tensor) list.
std::string checkpoint_bytes(const std::vector<std::pair<std::string, const Tensor<float>*>>& named,
                             std::uint32_t version = kCheckpointVersion) {
  std::ostringstream out(std::ios::binary);
  out.write("SDCK", 4);
  le::put_u32(out, version);
  le::put_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    le::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_sdt1(out, *t);
  }
  return out.str();
}

CheckpointError::Kind read_error_kind(const std::string& bytes, std::string* message = nullptr) {
  std::istringstream in(bytes, std::ios::binary);
  try {
    read_checkpoint(in);
  } catch (const CheckpointError& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  FAIL("checkpoint was accepted");
  return CheckpointError::Kind::kShape;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sdnet_io_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("SDT1 byte layout") {
  const Tensor<float> t({2, 1}, {1.0f, -2.5f});
  const std::string b = sdt1_bytes(t);
  // magic, rank, 2 extents, dtype, 2 floats
  REQUIRE(b.size() == 4 + 4 + 8 + 1 + 8);
  CHECK(b.substr(0, 4) == "SDT1");
  CHECK(b[4] == 2);
  CHECK(b[8] == 2);
  CHECK(b[12] == 1);
  CHECK(b[16] == 0);
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[17 + i])) << (8 * i);
  CHECK(std::bit_cast<float>(bits) == 1.0f);
}

TEST_CASE("SDT1 round trip is bit-exact") {
  Tensor<float> t({3, 2, 4});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = std::sin(static_cast<float>(i)) * 1e3f;
  t[0] = -0.0f;
  t[1] = std::numeric_limits<float>::denorm_min();
  std::istringstream in(sdt1_bytes(t), std::ios::binary);
  CHECK(bit_identical(read_sdt1(in), t));

  const Tensor<float> scalar({}, {7.0f});
  std::istringstream in0(sdt1_bytes(scalar), std::ios::binary);
  CHECK(read_sdt1(in0) == scalar);
}

TEST_CASE("SDT1 rejects bad input") {
  const std::string good = sdt1_bytes(Tensor<float>({2, 2}, 1.0f));
  std::string bad = good;
  bad[0] = 'X';
  std::istringstream a(bad, std::ios::binary);
  CHECK_THROWS_AS(read_sdt1(a), FormatError);
  bad = good;
  bad[16] = 3;
  std::istringstream b(bad, std::ios::binary);
  CHECK_THROWS_AS(read_sdt1(b), FormatError);
  std::istringstream c(good.substr(0, good.size() - 1), std::ios::binary);
  CHECK_THROWS_AS(read_sdt1(c), FormatError);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig m;
  m.num_classes = 5;
  m.channels = 6;
  const SDNetParameters p = init_parameters(m, 9);
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, p);
  std::istringstream in(out.str(), std::ios::binary);
  const SDNetParameters q = read_checkpoint(in);
  CHECK(q.config == p.config);
  CHECK(bit_identical(p, q));

  const fs::path dir = scratch_dir("ckpt");
  save_checkpoint(p, dir / "model.sdck");
  CHECK(bit_identical(load_checkpoint(dir / "model.sdck"), p));
  CHECK_FALSE(fs::exists(dir / "model.sdck.tmp"));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint corruption is reported by kind") {
  ModelConfig m;
  m.num_classes = 4;
  m.channels = 4;
  const SDNetParameters p = init_parameters(m, 1);
  const auto named = p.named_tensors();
  std::vector<std::pair<std::string, const Tensor<float>*>> list(named.begin(), named.end());
  const std::string good = checkpoint_bytes(list);

  std::string msg;
  std::string bad = good;
  bad[1] = 'X';
  CHECK(read_error_kind(bad, &msg) == CheckpointError::Kind::kBadMagic);
  CHECK(msg.find("SDCK") != std::string::npos);

  CHECK(read_error_kind(checkpoint_bytes(list, 2)) == CheckpointError::Kind::kBadVersion);
  CHECK(read_error_kind(good.substr(0, good.size() - 3)) == CheckpointError::Kind::kTruncated);
  CHECK(read_error_kind(good.substr(0, 10)) == CheckpointError::Kind::kTruncated);

  auto extra = list;
  const Tensor<float> junk({1}, 0.0f);
  extra.emplace_back("enc4.conv.weight", &junk);
  CHECK(read_error_kind(checkpoint_bytes(extra), &msg) == CheckpointError::Kind::kUnknownTensor);
  CHECK(msg.find("enc4.conv.weight") != std::string::npos);

  auto missing = list;
  missing.erase(missing.begin() + 3);
  CHECK(read_error_kind(checkpoint_bytes(missing), &msg) == CheckpointError::Kind::kMissingTensor);
  CHECK(msg.find(list[3].first) != std::string::npos);

  auto wrong = list;
  const Tensor<float> short_bias({3}, 0.0f);
  for (auto& [name, t] : wrong) {
    if (name == "enc2.conv.bias") t = &short_bias;
  }
  CHECK(read_error_kind(checkpoint_bytes(wrong)) == CheckpointError::Kind::kShape);
}

TEST_CASE("checkpoint records its own architecture") {
  ModelConfig m;
  m.num_classes = 8;
  m.channels = 64;
  const SDNetParameters p = init_parameters(m, 2);
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, p);
  std::istringstream in(out.str(), std::ios::binary);
  const SDNetParameters q = read_checkpoint(in);
  CHECK(q.config.num_classes == 8);
  CHECK(q.config.channels == 64);
  CHECK(q.config.kernel_size == 7);
  CHECK_THROWS_AS(check_num_classes(q, 4), ShapeError);
}

TEST_CASE("atomic write leaves the old file on failure") {
  const fs::path dir = scratch_dir("atomic");
  const fs::path f = dir / "t.sdt";
  save_tensor(f, Tensor<float>({2}, 1.0f));
  CHECK_THROWS(atomic_write(f, [](std::ostream&) { throw std::runtime_error("boom"); }));
  CHECK(load_tensor(f) == Tensor<float>({2}, 1.0f));
  CHECK_THROWS(load_tensor(dir / "missing.sdt"));
  fs::remove_all(dir);
}
