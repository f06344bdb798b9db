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

#include "sdnet/losses.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sdnet {

namespace {

constexpr double kLogClamp = 1e-12;
constexpr double kNormalizationTolerance = 1e-4;

void check_inputs(const Shape& shape, std::size_t num_labels, std::size_t num_weights) {
  if (shape.size() != 4) {
    throw ShapeError("composite_loss: probabilities must be (B,N,H,W), got " +
                     shape_to_string(shape));
  }
  const std::size_t pixels = shape[0] * shape[2] * shape[3];
  if (num_labels != pixels || num_weights != pixels) {
    throw ShapeError("composite_loss: expected " + std::to_string(pixels) +
                     " labels and weights, got " + std::to_string(num_labels) + " and " +
                     std::to_string(num_weights));
  }
}

// Per-class sums feeding the soft Dice ratio.
struct DiceSums {
  std::vector<double> intersection, prob_sq, target_sq;
};

template <typename T>
DiceSums dice_sums(const Tensor<T>& p, std::span<const Label> labels) {
  const std::size_t batch = p.dim(0), n = p.dim(1), hw = p.dim(2) * p.dim(3);
  DiceSums s{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t l = 0; l < n; ++l) {
      const T* pl = p.data() + (b * n + l) * hw;
      double inter = 0, sq = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        const double v = pl[i];
        sq += v * v;
        if (labels[b * hw + i] == static_cast<Label>(l)) {
          inter += v;
          s.target_sq[l] += 1.0;
        }
      }
      s.intersection[l] += inter;
      s.prob_sq[l] += sq;
    }
  }
  return s;
}

}  // namespace

void LossConfig::validate() const {
  if (!(omega0 >= 0)) throw std::invalid_argument("omega0 must be >= 0");
  if (!(q > 0 && q < 1)) throw std::invalid_argument("q must lie in (0, 1)");
  if (!(dice_epsilon > 0)) throw std::invalid_argument("dice_epsilon must be > 0");
}

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty vector");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ClassFrequencies class_frequencies(std::span<const LabelSlice> corpus, int num_classes) {
  if (corpus.empty()) throw std::invalid_argument("class_frequencies: empty corpus");
  if (num_classes < 1) throw std::invalid_argument("class_frequencies: num_classes must be >= 1");
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(num_classes), 0);
  std::uint64_t total = 0;
  for (const LabelSlice& s : corpus) {
    for (Label l : s.labels) {
      if (l < 0 || l >= num_classes) {
        throw std::invalid_argument("class_frequencies: label " + std::to_string(l) +
                                    " outside [0, " + std::to_string(num_classes) + ")");
      }
      ++counts[static_cast<std::size_t>(l)];
    }
    total += s.labels.size();
  }
  if (total == 0) throw std::invalid_argument("class_frequencies: corpus has no pixels");
  ClassFrequencies freq;
  freq.f.reserve(counts.size());
  for (std::uint64_t c : counts) freq.f.push_back(static_cast<double>(c) / static_cast<double>(total));
  return freq;
}

std::vector<std::uint8_t> boundary_mask(const LabelSlice& s) {
  std::vector<std::uint8_t> mask(s.size(), 0);
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      const Label v = s.at(y, x);
      const bool edge = (y > 0 && s.at(y - 1, x) != v) || (y + 1 < s.height && s.at(y + 1, x) != v) ||
                        (x > 0 && s.at(y, x - 1) != v) || (x + 1 < s.width && s.at(y, x + 1) != v);
      mask[y * s.width + x] = edge ? 1 : 0;
    }
  }
  return mask;
}

std::vector<double> mfb_class_weights(const ClassFrequencies& freq) {
  const double med = median(freq.f);
  std::vector<double> w(freq.f.size(), 0.0);
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (freq.f[l] > 0) w[l] = med / freq.f[l];
  }
  return w;
}

WeightMap mfb_weights(const LabelSlice& labels, const ClassFrequencies& freq, double omega0) {
  if (!(omega0 >= 0)) throw std::invalid_argument("mfb_weights: omega0 must be >= 0");
  const std::vector<double> class_w = mfb_class_weights(freq);
  for (Label l : labels.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= freq.f.size()) {
      throw std::invalid_argument("mfb_weights: label " + std::to_string(l) +
                                  " has no frequency entry");
    }
    if (!(freq.f[static_cast<std::size_t>(l)] > 0)) {
      throw std::invalid_argument("mfb_weights: class " + std::to_string(l) +
                                  " occurs in the slice but has frequency 0");
    }
  }
  return broadcast_class_weights(labels, class_w, omega0);
}

std::vector<double> ecb_weights(const AccuracyVector& accuracy, double q) {
  if (!(q > 0)) throw std::invalid_argument("ecb_weights: q must be > 0");
  const std::vector<double>& a = accuracy.a;
  if (a.empty()) throw std::invalid_argument("ecb_weights: empty accuracy vector");
  for (double v : a) {
    if (!(v >= 0 && v <= 1)) {
      throw std::invalid_argument("ecb_weights: accuracy " + std::to_string(v) + " outside [0,1]");
    }
  }
  const double margin = *std::min_element(a.begin(), a.end()) - q;
  const double numer = median(a) - margin;
  std::vector<double> w(a.size());
  for (std::size_t l = 0; l < a.size(); ++l) w[l] = numer / (a[l] - margin);
  return w;
}

WeightMap broadcast_class_weights(const LabelSlice& labels, std::span<const double> class_weights,
                                  double omega0) {
  WeightMap map{labels.height, labels.width, std::vector<double>(labels.size())};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Label l = labels.labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= class_weights.size()) {
      throw std::invalid_argument("class weight lookup: label " + std::to_string(l) +
                                  " out of range");
    }
    map.weights[i] = class_weights[static_cast<std::size_t>(l)];
  }
  if (omega0 > 0) {
    const std::vector<std::uint8_t> mask = boundary_mask(labels);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) map.weights[i] += omega0;
    }
  }
  return map;
}

template <typename T>
LossTerms composite_loss_terms(const Tensor<T>& p, std::span<const Label> labels,
                               std::span<const double> weights, const LossConfig& config) {
  config.validate();
  check_inputs(p.shape(), labels.size(), weights.size());
  const std::size_t batch = p.dim(0), n = p.dim(1), hw = p.dim(2) * p.dim(3);

  LossTerms terms;
  double logistic = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < hw; ++i) {
      double sum = 0;
      for (std::size_t l = 0; l < n; ++l) sum += p[(b * n + l) * hw + i];
      if (std::abs(sum - 1.0) > kNormalizationTolerance) {
        throw std::invalid_argument("composite_loss: probabilities at batch " + std::to_string(b) +
                                    " pixel " + std::to_string(i) + " sum to " +
                                    std::to_string(sum));
      }
      const Label l = labels[b * hw + i];
      if (l < 0 || static_cast<std::size_t>(l) >= n) {
        throw std::invalid_argument("composite_loss: label " + std::to_string(l) + " out of range");
      }
      const double pl = p[(b * n + static_cast<std::size_t>(l)) * hw + i];
      logistic -= weights[b * hw + i] * std::log(std::max(pl, kLogClamp));
    }
  }
  if (config.reduction == LogisticReduction::kMean) logistic /= static_cast<double>(batch * hw);
  terms.logistic = logistic;
  terms.total = logistic;

  if (config.use_dice) {
    const DiceSums s = dice_sums(p, labels);
    terms.dice.resize(n);
    double acc = 0;
    for (std::size_t l = 0; l < n; ++l) {
      terms.dice[l] = (2 * s.intersection[l] + config.dice_epsilon) /
                      (s.prob_sq[l] + s.target_sq[l] + config.dice_epsilon);
      acc += terms.dice[l];
    }
    terms.dice_mean = acc / static_cast<double>(n);
    terms.total -= terms.dice_mean;
  }
  return terms;
}

template <typename T>
Var composite_loss(Tape<T>& tape, Var probs, std::span<const Label> labels,
                   std::span<const double> weights, const LossConfig& config) {
  const Tensor<T>& p = tape.value(probs);
  const LossTerms terms = composite_loss_terms(p, labels, weights, config);
  Tensor<T> out(Shape{}, static_cast<T>(terms.total));
  return tape.record(
      std::move(out), tape.requires_grad(probs),
      [probs, config, labels = std::vector<Label>(labels.begin(), labels.end()),
       weights = std::vector<double>(weights.begin(), weights.end())](Tape<T>& t, Var self) {
        const double g = t.grad(self)[0];
        const Tensor<T>& pv = t.value(probs);
        Tensor<T>& gp = t.grad(probs);
        const std::size_t batch = pv.dim(0), n = pv.dim(1), hw = pv.dim(2) * pv.dim(3);
        const double scale = config.reduction == LogisticReduction::kMean
                                 ? 1.0 / static_cast<double>(batch * hw)
                                 : 1.0;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < hw; ++i) {
            const auto l = static_cast<std::size_t>(labels[b * hw + i]);
            const std::size_t o = (b * n + l) * hw + i;
            const double pl = pv[o];
            if (pl > kLogClamp) gp[o] += static_cast<T>(-g * scale * weights[b * hw + i] / pl);
          }
        }
        if (!config.use_dice) return;
        const DiceSums s = dice_sums(pv, labels);
        const double eps = config.dice_epsilon;
        for (std::size_t l = 0; l < n; ++l) {
          const double num = 2 * s.intersection[l] + eps;
          const double den = s.prob_sq[l] + s.target_sq[l] + eps;
          // d(-mean_l Dice_l)/dp = -(1/N) (2 g_l den - num 2 p_l) / den^2
          const double c = -g / static_cast<double>(n) / (den * den);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t i = 0; i < hw; ++i) {
              const std::size_t o = (b * n + l) * hw + i;
              const double target = labels[b * hw + i] == static_cast<Label>(l) ? 1.0 : 0.0;
              gp[o] += static_cast<T>(c * (2 * target * den - 2 * num * pv[o]));
            }
          }
        }
      });
}

template LossTerms composite_loss_terms(const Tensor<float>&, std::span<const Label>,
                                        std::span<const double>, const LossConfig&);
template LossTerms composite_loss_terms(const Tensor<double>&, std::span<const Label>,
                                        std::span<const double>, const LossConfig&);
template Var composite_loss(Tape<float>&, Var, std::span<const Label>, std::span<const double>,
                            const LossConfig&);
template Var composite_loss(Tape<double>&, Var, std::span<const Label>, std::span<const double>,
                            const LossConfig&);

}  // namespace sdnet
