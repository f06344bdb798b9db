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

#ifndef SDNET_IO_H_
#define SDNET_IO_H_

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "sdnet/tensor.h"

namespace sdnet {

// Malformed, truncated, or mismatched file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SDT1 record layout (all integers little-endian):
//   "SDT1" | u32 rank | rank x u32 extent | u8 dtype (0 = f32) | raw elements
void write_sdt1(std::ostream& out, const Tensor<float>& tensor);
Tensor<float> read_sdt1(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor<float>& tensor);
Tensor<float> load_tensor(const std::filesystem::path& path);

// Writes through a sibling temporary file and renames it into place, so a
// reader never observes a partially written file.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

namespace le {
void put_u16(std::ostream& out, std::uint16_t v);
void put_u32(std::ostream& out, std::uint32_t v);
std::uint16_t get_u16(std::istream& in, const char* what);
std::uint32_t get_u32(std::istream& in, const char* what);
}  // namespace le

}  // namespace sdnet

#endif  // SDNET_IO_H_
