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

#ifndef SDNET_AUTOGRAD_H_
#define SDNET_AUTOGRAD_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "sdnet/tensor.h"

namespace sdnet {

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Reverse-mode differentiation tape for one forward/backward pass. Values are
// immutable once recorded; gradients are allocated on first accumulation.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor<T> value, bool requires_grad = true);

  // Records an op output. `backward` reads grad(self) and accumulates into
  // its inputs; it runs only if the output received a gradient.
  Var record(Tensor<T> value, bool requires_grad, BackwardFn backward);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty() || value(v).empty(); }

  // Gradient slot, zero-filled on first access.
  Tensor<T>& grad(Var v);

  // Seeds d(root)/d(root) = 1 and propagates in reverse recording order.
  // `root` must hold a single element.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Argmax position within each 2x2 pooling window, row-major: 0 1 / 2 3.
struct PoolIndices {
  Shape shape;  // shape of the pooled output
  std::vector<std::uint8_t> window_pos;
};

enum class BatchNormMode { kTrain, kEval };

template <typename T>
struct BatchNormState {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;
  BatchNormMode mode = BatchNormMode::kTrain;

  // gamma=1, beta=0, running mean 0, running variance 1.
  static BatchNormState identity(std::size_t channels);

  template <typename U>
  BatchNormState<U> cast() const {
    return {gamma.template cast<U>(), beta.template cast<U>(), running_mean.template cast<U>(),
            running_var.template cast<U>(), epsilon, momentum, mode};
  }
};

// Same-size convolution: stride 1, odd square kernel, zero padding (k-1)/2.
template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var kernel, Var bias);

// `gamma` and `beta` are the tape leaves holding state.gamma and state.beta.
// Train mode normalizes with batch statistics and updates the running
// statistics in `state`; eval mode uses the running statistics.
template <typename T>
Var batchnorm2d(Tape<T>& tape, Var input, Var gamma, Var beta, BatchNormState<T>& state);

template <typename T>
Var relu(Tape<T>& tape, Var input);

struct PoolResult {
  Var output;
  PoolIndices indices;
};

template <typename T>
PoolResult maxpool2x2(Tape<T>& tape, Var input);

template <typename T>
Var unpool2x2(Tape<T>& tape, Var input, const PoolIndices& indices);

template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b);

template <typename T>
Var softmax_channels(Tape<T>& tape, Var logits);

// Scalar sum(weights * input); used to project outputs for gradient checks.
template <typename T>
Var weighted_sum(Tape<T>& tape, Var input, const Tensor<T>& weights);

namespace debug {
// Fault injection for the gradient-check harness: negates the conv2d
// backward pass while enabled.
void set_negate_conv_backward(bool enabled);
bool negate_conv_backward();
}  // namespace debug

}  // namespace sdnet

#endif  // SDNET_AUTOGRAD_H_
