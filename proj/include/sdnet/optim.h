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

#ifndef SDNET_OPTIM_H_
#define SDNET_OPTIM_H_

#include <span>
#include <vector>

#include "sdnet/tensor.h"

namespace sdnet {

struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

// One velocity buffer per parameter, in parameter registration order.
struct SgdState {
  std::vector<Tensor<float>> velocity;
};

// g' = g + weight_decay * w;  v' = momentum * v + g';  w' = w - lr * v'.
// Velocity buffers are created (zero) on the first call. Every gradient is
// checked before any parameter is touched; a non-finite gradient throws
// NumericError and leaves params and state unchanged.
void sgd_step(std::span<Tensor<float>* const> params, std::span<const Tensor<float>* const> grads,
              SgdState& state, const SgdOptions& options);

}  // namespace sdnet

#endif  // SDNET_OPTIM_H_
