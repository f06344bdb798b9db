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

#include "sdnet/labels.h"

#include <algorithm>
#include <stdexcept>

namespace sdnet {

LabelSlice LabelVolume::slice(std::size_t z) const {
  if (z >= depth) throw std::out_of_range("slice index out of range");
  const auto first = labels.begin() + static_cast<std::ptrdiff_t>(z * height * width);
  return LabelSlice(height, width, std::vector<Label>(first, first + static_cast<std::ptrdiff_t>(height * width)));
}

void LabelVolume::set_slice(std::size_t z, const LabelSlice& s) {
  if (z >= depth || s.height != height || s.width != width) {
    throw std::invalid_argument("set_slice: slice does not fit the volume");
  }
  std::copy(s.labels.begin(), s.labels.end(),
            labels.begin() + static_cast<std::ptrdiff_t>(z * height * width));
}

}  // namespace sdnet
