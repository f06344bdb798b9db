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

#include "sdnet/metrics.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sdnet {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

ConfusionCounts::ConfusionCounts(int num_classes)
    : num_classes_(num_classes),
      tp_(static_cast<std::size_t>(num_classes)),
      fp_(static_cast<std::size_t>(num_classes)),
      fn_(static_cast<std::size_t>(num_classes)) {
  if (num_classes < 1) throw std::invalid_argument("ConfusionCounts: num_classes must be >= 1");
}

void ConfusionCounts::add(std::span<const Label> pred, std::span<const Label> gt) {
  if (pred.size() != gt.size()) {
    throw ShapeError("dice: prediction has " + std::to_string(pred.size()) +
                     " pixels, ground truth " + std::to_string(gt.size()));
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Label p = pred[i], g = gt[i];
    if (p < 0 || p >= num_classes_ || g < 0 || g >= num_classes_) {
      throw std::invalid_argument("dice: label outside [0, " + std::to_string(num_classes_) + ")");
    }
    if (p == g) {
      ++tp_[static_cast<std::size_t>(p)];
    } else {
      ++fp_[static_cast<std::size_t>(p)];
      ++fn_[static_cast<std::size_t>(g)];
    }
  }
}

std::vector<double> ConfusionCounts::dice() const {
  std::vector<double> d(tp_.size());
  for (std::size_t l = 0; l < d.size(); ++l) {
    const std::uint64_t denom = 2 * tp_[l] + fp_[l] + fn_[l];
    d[l] = denom == 0 ? 1.0 : static_cast<double>(2 * tp_[l]) / static_cast<double>(denom);
  }
  return d;
}

std::vector<double> dice_per_class(std::span<const Label> pred, std::span<const Label> gt,
                                   int num_classes) {
  ConfusionCounts c(num_classes);
  c.add(pred, gt);
  return c.dice();
}

std::vector<double> dice_per_class(const LabelVolume& pred, const LabelVolume& gt, int num_classes) {
  if (pred.depth != gt.depth || pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError("dice_per_class: prediction and ground-truth extents differ");
  }
  return dice_per_class(pred.labels, gt.labels, num_classes);
}

double foreground_mean(std::span<const double> dice) {
  if (dice.size() < 2) return mean_of(dice);
  return mean_of(dice.subspan(1));
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0;
  const double m = mean_of(values);
  double ss = 0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double DiceReport::min_class_mean() const {
  if (class_mean.size() < 2) return class_mean.empty() ? 0 : class_mean[0];
  return *std::min_element(class_mean.begin() + 1, class_mean.end());
}

DiceReport build_report(std::span<const int> ids, std::span<const LabelVolume> preds,
                        std::span<const LabelVolume> gts, int num_classes) {
  if (ids.size() != preds.size() || preds.size() != gts.size()) {
    throw std::invalid_argument("build_report: ids, predictions and labels differ in count");
  }
  DiceReport r;
  r.num_classes = num_classes;
  r.volume_ids.assign(ids.begin(), ids.end());
  const auto n = static_cast<std::size_t>(num_classes);
  std::vector<std::uint64_t> pooled(n, 0);
  std::uint64_t total = 0;
  for (std::size_t v = 0; v < preds.size(); ++v) {
    r.dice.push_back(dice_per_class(preds[v], gts[v], num_classes));
    std::vector<std::uint64_t> counts(n, 0);
    for (Label l : gts[v].labels) ++counts[static_cast<std::size_t>(l)];
    std::vector<double> freq(n);
    for (std::size_t l = 0; l < n; ++l) {
      freq[l] = static_cast<double>(counts[l]) / static_cast<double>(gts[v].size());
      pooled[l] += counts[l];
    }
    total += gts[v].size();
    r.volume_freq.push_back(std::move(freq));
    r.volume_mean.push_back(foreground_mean(r.dice.back()));
  }
  for (std::size_t l = 0; l < n; ++l) {
    std::vector<double> column;
    for (const auto& row : r.dice) column.push_back(row[l]);
    r.class_mean.push_back(mean_of(column));
    r.class_std.push_back(sample_std(column));
    r.class_freq.push_back(total ? static_cast<double>(pooled[l]) / static_cast<double>(total) : 0);
  }
  r.overall_mean = mean_of(r.volume_mean);
  r.overall_std = sample_std(r.volume_mean);
  return r;
}

DiceReport evaluate_volumes(const Segmenter& segment, const VolumeSet& test, int num_classes) {
  std::vector<LabelVolume> preds;
  std::vector<double> seconds;
  for (std::size_t v = 0; v < test.images.size(); ++v) {
    const auto start = std::chrono::steady_clock::now();
    LabelVolume pred = segment(test.images[v]);
    seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    if (pred.depth != test.labels[v].depth || pred.height != test.labels[v].height ||
        pred.width != test.labels[v].width) {
      throw ShapeError("evaluate: segmentation extent differs from volume " +
                       std::to_string(test.ids[v]));
    }
    preds.push_back(std::move(pred));
  }
  DiceReport r = build_report(test.ids, preds, test.labels, num_classes);
  r.seconds = std::move(seconds);
  return r;
}

LabelVolume segment_volume(const SDNetParameters& params, const Tensor<float>& image,
                           std::size_t batch_size) {
  if (image.rank() != 3) throw ShapeError("segment_volume: image must be (D, H, W)");
  const std::size_t depth = image.dim(0), h = image.dim(1), w = image.dim(2);
  LabelVolume out(depth, h, w);
  batch_size = std::max<std::size_t>(1, batch_size);
  for (std::size_t z0 = 0; z0 < depth; z0 += batch_size) {
    const std::size_t b = std::min(batch_size, depth - z0);
    Tensor<float> batch({b, 1, h, w});
    std::copy_n(image.data() + z0 * h * w, b * h * w, batch.data());
    const std::vector<LabelSlice> labels = predict_labels(predict_probabilities(params, batch));
    for (std::size_t i = 0; i < b; ++i) out.set_slice(z0 + i, labels[i]);
  }
  return out;
}

DiceReport evaluate_model(const SDNetParameters& params, const VolumeSet& test) {
  for (const LabelVolume& l : test.labels) {
    for (Label v : l.labels) {
      if (v >= params.config.num_classes) {
        throw std::invalid_argument("evaluate_model: test label " + std::to_string(v) +
                                    " exceeds the model's " +
                                    std::to_string(params.config.num_classes) + " classes");
      }
    }
  }
  return evaluate_volumes(
      [&](const Tensor<float>& image) { return segment_volume(params, image); }, test,
      params.config.num_classes);
}

void write_report_csv(std::ostream& out, const DiceReport& r) {
  out << "volume,class,dice,freq\n";
  for (std::size_t v = 0; v < r.dice.size(); ++v) {
    for (std::size_t l = 0; l < r.dice[v].size(); ++l) {
      out << r.volume_ids[v] << ',' << l << ',' << fmt(r.dice[v][l]) << ','
          << fmt(r.volume_freq[v][l]) << '\n';
    }
  }
  for (std::size_t l = 0; l < r.class_mean.size(); ++l) {
    out << "AGG," << l << ',' << fmt(r.class_mean[l]) << ',' << fmt(r.class_freq[l]) << '\n';
  }
  for (std::size_t l = 0; l < r.class_std.size(); ++l) {
    out << "AGG_STD," << l << ',' << fmt(r.class_std[l]) << ',' << fmt(r.class_freq[l]) << '\n';
  }
  out << "AGG,all," << fmt(r.overall_mean) << ",\n";
  out << "AGG_STD,all," << fmt(r.overall_std) << ",\n";
}

}  // namespace sdnet
