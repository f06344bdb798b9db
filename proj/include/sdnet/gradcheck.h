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

#ifndef SDNET_GRADCHECK_H_
#define SDNET_GRADCHECK_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sdnet {

struct GradCheckOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double tolerance = 1e-3;
  double step = 1e-6;           // central-difference half step
  std::size_t max_coords = 24;  // coordinates probed per input tensor
};

struct GradCheckEntry {
  std::string op;
  double worst_error = 0;  // |a - n| / max(1e-6, |a|, |n|)
  std::size_t checks = 0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // one per checked operation
  double tolerance = 0;

  bool passed() const;
  std::vector<std::string> failed_ops() const;
};

// Finite-difference checks in double precision of every differentiable op
// and of the end-to-end network loss, on small random instances.
GradCheckReport run_gradcheck(const GradCheckOptions& options = {});

// One line per op, then a PASS/FAIL summary line.
void print_gradcheck(std::ostream& out, const GradCheckReport& report);

}  // namespace sdnet

#endif  // SDNET_GRADCHECK_H_
