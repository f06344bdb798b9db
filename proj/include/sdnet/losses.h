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

#ifndef SDNET_LOSSES_H_
#define SDNET_LOSSES_H_

#include <cstdint>
#include <span>
#include <vector>

#include "sdnet/autograd.h"
#include "sdnet/labels.h"

namespace sdnet {

// Per-pixel loss weights, same extents as the LabelSlice they were built from.
struct WeightMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> weights;

  double at(std::size_t y, std::size_t x) const { return weights[y * width + x]; }
};

// Corpus-level label-class probabilities f_l.
struct ClassFrequencies {
  std::vector<double> f;
};

// Per-class validation accuracies a^t for epoch t.
struct AccuracyVector {
  std::vector<double> a;
  int epoch = 0;
};

enum class LogisticReduction {
  kSum,   // -sum_x w(x) log p(x)
  kMean,  // the same sum divided by the number of pixels
};

struct LossConfig {
  double omega0 = 5.0;
  bool use_dice = true;
  double dice_epsilon = 1e-6;
  double q = 0.05;
  LogisticReduction reduction = LogisticReduction::kSum;

  // Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

// Standard median; the mean of the two middle values for even sizes.
double median(std::span<const double> values);

// f_l = (#pixels labeled l) / (#pixels) over the whole corpus.
ClassFrequencies class_frequencies(std::span<const LabelSlice> corpus, int num_classes);

// 1 where any in-bounds 4-neighbour carries a different label.
std::vector<std::uint8_t> boundary_mask(const LabelSlice& labels);

// median(f) / f_l per class; 0 for classes with f_l == 0.
std::vector<double> mfb_class_weights(const ClassFrequencies& freq);

// w(x) = median(f) / f_{S(x)} + omega0 * boundary(x).
WeightMap mfb_weights(const LabelSlice& labels, const ClassFrequencies& freq, double omega0);

// Median accuracy balancing: m = min(a) - q, w_l = (median(a) - m) / (a_l - m).
std::vector<double> ecb_weights(const AccuracyVector& accuracy, double q);

// w(x) = class_weights[S(x)] (+ omega0 on boundary pixels when omega0 > 0).
WeightMap broadcast_class_weights(const LabelSlice& labels, std::span<const double> class_weights,
                                  double omega0 = 0.0);

struct LossTerms {
  double logistic = 0;
  std::vector<double> dice;  // soft Dice per class
  double dice_mean = 0;
  double total = 0;
};

// Evaluates the weighted logistic + soft Dice loss for probabilities p of
// shape (B, N, H, W). `labels` and `weights` are (B, H, W) row-major.
// Throws std::invalid_argument if any pixel's probabilities do not sum to 1
// within 1e-4.
template <typename T>
LossTerms composite_loss_terms(const Tensor<T>& probs, std::span<const Label> labels,
                               std::span<const double> weights, const LossConfig& config);

// Differentiable form of composite_loss_terms; returns a scalar Var.
template <typename T>
Var composite_loss(Tape<T>& tape, Var probs, std::span<const Label> labels,
                   std::span<const double> weights, const LossConfig& config);

}  // namespace sdnet

#endif  // SDNET_LOSSES_H_
