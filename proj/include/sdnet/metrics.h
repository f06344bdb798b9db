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

#ifndef SDNET_METRICS_H_
#define SDNET_METRICS_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "sdnet/data.h"
#include "sdnet/labels.h"
#include "sdnet/model.h"

namespace sdnet {

// Dice_l = 2|P_l & G_l| / (|P_l| + |G_l|); 1 when class l is absent from both.
std::vector<double> dice_per_class(std::span<const Label> pred, std::span<const Label> gt,
                                   int num_classes);
std::vector<double> dice_per_class(const LabelVolume& pred, const LabelVolume& gt, int num_classes);

// Pooled counts for Dice over many slices.
class ConfusionCounts {
 public:
  explicit ConfusionCounts(int num_classes);
  void add(std::span<const Label> pred, std::span<const Label> gt);
  std::vector<double> dice() const;

 private:
  int num_classes_;
  std::vector<std::uint64_t> tp_, fp_, fn_;
};

// Mean over classes 1..N-1; background does not count towards the summary.
double foreground_mean(std::span<const double> dice);

struct DiceReport {
  int num_classes = 0;
  std::vector<int> volume_ids;
  std::vector<std::vector<double>> dice;        // [volume][class]
  std::vector<std::vector<double>> volume_freq;  // [volume][class], ground truth
  std::vector<double> class_mean, class_std;
  std::vector<double> class_freq;                // pooled over all test volumes
  std::vector<double> volume_mean;               // foreground mean per volume
  double overall_mean = 0, overall_std = 0;
  std::vector<double> seconds;                   // wall time per volume, not serialized

  double min_class_mean() const;  // worst foreground class
};

// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> values);

DiceReport build_report(std::span<const int> ids, std::span<const LabelVolume> preds,
                        std::span<const LabelVolume> gts, int num_classes);

using Segmenter = std::function<LabelVolume(const Tensor<float>& image)>;

// Runs `segment` on every volume (timed) and scores it against the labels.
DiceReport evaluate_volumes(const Segmenter& segment, const VolumeSet& test, int num_classes);

// Eval-mode segmentation of every axial slice, reassembled into a volume.
LabelVolume segment_volume(const SDNetParameters& params, const Tensor<float>& image,
                           std::size_t batch_size = 8);

DiceReport evaluate_model(const SDNetParameters& params, const VolumeSet& test);

// Columns volume,class,dice,freq; one row per (volume, class), then per-class
// rows "AGG" (mean) and "AGG_STD", and class "all" for the overall summary.
void write_report_csv(std::ostream& out, const DiceReport& report);

}  // namespace sdnet

#endif  // SDNET_METRICS_H_
