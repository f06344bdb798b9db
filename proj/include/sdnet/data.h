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

#ifndef SDNET_DATA_H_
#define SDNET_DATA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdnet/labels.h"
#include "sdnet/tensor.h"

namespace sdnet {

// Synthetic brain-like volume: intensities in [0, 1], shape (D, H, W).
struct Phantom {
  Tensor<float> image;
  LabelVolume labels;
  std::uint64_t seed = 0;
};

// Class roles used by the phantom generator.
inline constexpr Label kBackground = 0;
inline constexpr Label kGrayMatter = 1;
inline constexpr Label kWhiteMatter = 2;
inline constexpr Label kVentricles = 3;
inline constexpr int kMinPhantomClasses = 4;

// Deterministic in `seed`. Extents must be multiples of 8; num_classes >= 4.
// Classes >= 4 are small blobs inside the white matter; the last one is the
// smallest (roughly 0.1-0.3% of voxels at 8x64x64).
Phantom generate_phantom(std::uint64_t seed, int num_classes, std::size_t depth,
                         std::size_t height, std::size_t width);

// Systematic label errors standing in for an automated labelling tool.
// Per-class vectors may be shorter than the class count; missing entries are 0.
struct CorruptionConfig {
  std::vector<int> erode_radius;
  std::vector<int> dilate_radius;
  double boundary_jitter = 0.0;
  std::vector<double> mislabel_rate;
  std::uint64_t seed = 0;

  void validate() const;
  bool is_identity() const;
  // Hits the small classes hardest: dilation or erosion plus a mislabel rate
  // above the boundary jitter.
  static CorruptionConfig tool_like(int num_classes, std::uint64_t seed);
};

// In-plane (per slice) morphology with a square structuring element, then
// boundary jitter, then small-class relabelling. Deterministic in config.seed.
LabelVolume corrupt_labels(const LabelVolume& gt, const CorruptionConfig& config);

// Per-slice building blocks of corrupt_labels, exposed for testing.
LabelSlice erode_class(const LabelSlice& s, Label cls, int radius);
LabelSlice dilate_class(const LabelSlice& s, Label cls, int radius);

// One axial training sample. `image` is (H, W).
struct Sample {
  Tensor<float> image;
  LabelSlice labels;
};

// Axial slices in (volume, slice) order.
std::vector<Sample> slice_volume(const Tensor<float>& image, const LabelVolume& labels);
std::vector<Sample> slice_dataset(std::span<const Tensor<float>> images,
                                  std::span<const LabelVolume> labels);
// Inverse of slice_volume.
std::pair<Tensor<float>, LabelVolume> assemble_volume(std::span<const Sample> slices);

struct AugmentationConfig {
  int max_translation = 2;      // pixels
  double max_rotation = 5.0;    // degrees

  void validate() const;
};

struct RigidTransform {
  int dx = 0;  // +x shifts content towards higher column indices
  int dy = 0;
  double angle_deg = 0.0;  // rotation about the slice centre
};

RigidTransform sample_transform(const AugmentationConfig& config, std::uint64_t sample_seed);

// Nearest-neighbour for labels, bilinear for intensities; uncovered pixels
// become background / 0.
Sample apply_transform(const Sample& sample, const RigidTransform& t);
Tensor<float> transform_image(const Tensor<float>& image, const RigidTransform& t);
LabelSlice transform_labels(const LabelSlice& labels, const RigidTransform& t);

Sample augment(const Sample& sample, const AugmentationConfig& config, std::uint64_t sample_seed);

// ---------------------------------------------------------------------------
// On-disk dataset:
//   <root>/manifest.txt                key=value lines
//   <root>/vol_<id>/image.sdt          (D, H, W) intensities
//   <root>/vol_<id>/labels_manual.sdt  manual-label volumes only
//   <root>/vol_<id>/labels_aux.sdt     every volume
// Label files hold f32 values that are exact integers.

struct DatasetSplit {
  std::vector<int> aux_train;
  std::vector<int> aux_val;
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;

  // Throws if any id appears twice.
  void validate() const;
};

struct DatasetSpec {
  int num_classes = 8;
  std::size_t depth = 8;
  std::size_t height = 64;
  std::size_t width = 64;
  int num_aux = 60;
  int num_aux_val = 6;
  int num_train = 15;
  int num_val = 5;
  int num_test = 10;
  std::uint64_t seed = 1;
  std::optional<CorruptionConfig> corruption;  // defaults to tool_like

  void validate() const;
};

struct Manifest {
  DatasetSpec spec;
  DatasetSplit split;
};

enum class LabelSource { kManual, kAux };

std::string volume_dir_name(int id);

// Writes every volume and the manifest. Refuses a non-empty `root` unless
// `force` is set.
Manifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& root, bool force);

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

Tensor<float> load_image_volume(const std::filesystem::path& root, int id);
LabelVolume load_label_volume(const std::filesystem::path& root, int id, LabelSource source);

Tensor<float> label_volume_to_tensor(const LabelVolume& labels);
LabelVolume tensor_to_label_volume(const Tensor<float>& t, int num_classes);

// Loaded image volumes and labels for a list of ids.
struct VolumeSet {
  std::vector<int> ids;
  std::vector<Tensor<float>> images;
  std::vector<LabelVolume> labels;

  std::vector<Sample> samples() const;
};

VolumeSet load_volume_set(const std::filesystem::path& root, std::span<const int> ids,
                          LabelSource source, int num_classes);

}  // namespace sdnet

#endif  // SDNET_DATA_H_
