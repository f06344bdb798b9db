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

#include "sdnet/optim.h"

#include <cmath>
#include <string>

namespace sdnet {

void sgd_step(std::span<Tensor<float>* const> params, std::span<const Tensor<float>* const> grads,
              SgdState& state, const SgdOptions& options) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape()) {
      throw ShapeError("sgd_step: gradient " + std::to_string(i) + " has shape " +
                       shape_to_string(grads[i]->shape()) + ", parameter has " +
                       shape_to_string(params[i]->shape()));
    }
    grads[i]->check_finite("sgd_step: gradient of parameter " + std::to_string(i));
  }
  if (state.velocity.empty()) {
    for (const Tensor<float>* p : params) state.velocity.emplace_back(p->shape(), 0.0f);
  }
  if (state.velocity.size() != params.size()) {
    throw ShapeError("sgd_step: optimizer state holds " + std::to_string(state.velocity.size()) +
                     " buffers for " + std::to_string(params.size()) + " parameters");
  }

  const auto lr = static_cast<float>(options.lr);
  const auto mu = static_cast<float>(options.momentum);
  const auto wd = static_cast<float>(options.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<float>& w = *params[i];
    const Tensor<float>& g = *grads[i];
    Tensor<float>& v = state.velocity[i];
    for (std::size_t j = 0; j < w.numel(); ++j) {
      const float gj = g[j] + wd * w[j];
      v[j] = mu * v[j] + gj;
      w[j] -= lr * v[j];
    }
  }
}

}  // namespace sdnet
