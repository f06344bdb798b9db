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

#ifndef SDNET_LABELS_H_
#define SDNET_LABELS_H_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sdnet {

using Label = std::int32_t;

// 2-D integer class map S(x), row-major.
struct LabelSlice {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Label> labels;

  LabelSlice() = default;
  LabelSlice(std::size_t h, std::size_t w, Label fill = 0) : height(h), width(w), labels(h * w, fill) {}
  LabelSlice(std::size_t h, std::size_t w, std::vector<Label> values)
      : height(h), width(w), labels(std::move(values)) {}

  Label& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  Label at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::size_t size() const { return labels.size(); }
  bool operator==(const LabelSlice&) const = default;
};

// Stack of axial slices, (depth, height, width) row-major.
struct LabelVolume {
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Label> labels;

  LabelVolume() = default;
  LabelVolume(std::size_t d, std::size_t h, std::size_t w, Label fill = 0)
      : depth(d), height(h), width(w), labels(d * h * w, fill) {}

  Label& at(std::size_t z, std::size_t y, std::size_t x) { return labels[(z * height + y) * width + x]; }
  Label at(std::size_t z, std::size_t y, std::size_t x) const {
    return labels[(z * height + y) * width + x];
  }
  std::size_t size() const { return labels.size(); }

  LabelSlice slice(std::size_t z) const;
  void set_slice(std::size_t z, const LabelSlice& s);
  bool operator==(const LabelVolume&) const = default;
};

}  // namespace sdnet

#endif  // SDNET_LABELS_H_
