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

#ifndef SDNET_MODEL_H_
#define SDNET_MODEL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sdnet/autograd.h"
#include "sdnet/io.h"
#include "sdnet/labels.h"

namespace sdnet {

inline constexpr std::size_t kNumBlocks = 3;

struct ModelConfig {
  int num_classes = 8;
  std::size_t channels = 64;
  std::size_t kernel_size = 7;
  std::size_t input_channels = 1;

  void validate() const;
  // Spatial extents must be divisible by 2^kNumBlocks.
  static constexpr std::size_t kSpatialMultiple = 1u << kNumBlocks;
  bool operator==(const ModelConfig&) const = default;
};

// conv k x k -> batchnorm -> ReLU
template <typename T>
struct ConvBlock {
  Tensor<T> weight;  // (C_out, C_in, k, k)
  Tensor<T> bias;    // (C_out)
  BatchNormState<T> bn;
};

// Learnable tensors plus batch-norm running statistics. Decoder i consumes
// the pooling indices and pre-pool activation of encoder i.
template <typename T>
struct BasicParameters {
  ModelConfig config;
  std::array<ConvBlock<T>, kNumBlocks> encoders;
  std::array<ConvBlock<T>, kNumBlocks> decoders;
  Tensor<T> classifier_weight;  // (N, C, 1, 1)
  Tensor<T> classifier_bias;    // (N)

  using Named = std::vector<std::pair<std::string, Tensor<T>*>>;
  using ConstNamed = std::vector<std::pair<std::string, const Tensor<T>*>>;

  // Every stored tensor, in checkpoint order:
  //   enc{i}.conv.{weight,bias}, enc{i}.bn.{weight,bias,running_mean,running_var},
  //   dec{i}.*, classifier.{weight,bias}  with i = 1..3.
  Named named_tensors();
  ConstNamed named_tensors() const;

  // Learnable tensors only (no running statistics), in the same order.
  // This is the SGD registration order.
  Named learnable();

  void set_mode(BatchNormMode mode);

  template <typename U>
  BasicParameters<U> cast() const;
};

using SDNetParameters = BasicParameters<float>;

bool bit_identical(const SDNetParameters& a, const SDNetParameters& b);

// He-style uniform kernels in [-sqrt(6/fan_in), sqrt(6/fan_in)], zero biases,
// gamma 1, beta 0, running statistics (0, 1). Fully determined by `seed`.
SDNetParameters init_parameters(const ModelConfig& config, std::uint64_t seed);

template <typename T>
struct ForwardTrace {
  std::array<PoolIndices, kNumBlocks> indices;
  std::array<Tensor<T>, kNumBlocks> skips;     // pre-pool encoder activations
  std::array<Tensor<T>, kNumBlocks> unpooled;  // decoder unpool outputs
};

template <typename T>
struct ForwardPass {
  Var probs;
  std::vector<Var> learnable;  // tape leaves, parallel to params.learnable()
  ForwardTrace<T> trace;
};

// Records the full network on `tape`. `image` is (B, 1, H, W) with H and W
// divisible by 8. Sets every batch-norm block to `mode`; train mode updates
// the running statistics in `params`.
template <typename T>
ForwardPass<T> forward(Tape<T>& tape, BasicParameters<T>& params, const Tensor<T>& image,
                       BatchNormMode mode, bool requires_grad = true);

// Gradient-free eval-mode convenience returning the (B, N, H, W) probabilities.
Tensor<float> predict_probabilities(const SDNetParameters& params, const Tensor<float>& image);

// Per-pixel argmax over channels, lowest class index on ties. One slice per
// batch element.
template <typename T>
std::vector<LabelSlice> predict_labels(const Tensor<T>& probs);

// Checkpoint layout: "SDCK" | u32 version | u32 count |
//   count x (u16 name length | name | SDT1 record)
class CheckpointError : public FormatError {
 public:
  enum class Kind { kBadMagic, kBadVersion, kTruncated, kUnknownTensor, kMissingTensor, kShape };
  CheckpointError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const SDNetParameters& params, const std::filesystem::path& path);
SDNetParameters load_checkpoint(const std::filesystem::path& path);
void write_checkpoint(std::ostream& out, const SDNetParameters& params);
SDNetParameters read_checkpoint(std::istream& in);

}  // namespace sdnet

#endif  // SDNET_MODEL_H_
