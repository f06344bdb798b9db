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

#include "sdnet/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sdnet/io.h"
#include "sdnet/losses.h"
#include "sdnet/rng.h"

namespace sdnet {

namespace fs = std::filesystem;

namespace {

constexpr double kNoiseSigma = 0.03;

double class_intensity(Label l) {
  static constexpr double kBase[] = {0.0, 0.42, 0.72, 0.18};
  static constexpr double kBlob[] = {0.55, 0.30, 0.58, 0.47, 0.36, 0.62, 0.52};
  if (l < kMinPhantomClasses) return kBase[l];
  return kBlob[static_cast<std::size_t>(l - kMinPhantomClasses) % std::size(kBlob)];
}

struct Blob {
  double x, y, z, rx, ry, rz;
  bool contains(double px, double py, double pz) const {
    const double a = (px - x) / rx, b = (py - y) / ry, c = (pz - z) / rz;
    return a * a + b * b + c * c <= 1.0;
  }
};

template <typename V>
V at_or_zero(const std::vector<V>& v, std::size_t i) {
  return i < v.size() ? v[i] : V{};
}

// Most frequent label != `exclude` inside the square window; lowest label on
// ties. Returns `fallback` if the window holds no other label.
Label dominant_other(const LabelSlice& s, std::size_t y, std::size_t x, int radius, Label exclude,
                     Label fallback) {
  std::map<Label, int> counts;
  const auto r = static_cast<std::ptrdiff_t>(radius);
  for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
    for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
      const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
      const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
      if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(s.height) ||
          xx >= static_cast<std::ptrdiff_t>(s.width)) {
        continue;
      }
      const Label l = s.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
      if (l != exclude) ++counts[l];
    }
  }
  Label best = fallback;
  int best_count = 0;
  for (const auto& [l, c] : counts) {
    if (c > best_count) {
      best = l;
      best_count = c;
    }
  }
  return best;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split_csv(s)) out.push_back(std::stoi(item));
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_csv(s)) out.push_back(std::stod(item));
  return out;
}

}  // namespace

Phantom generate_phantom(std::uint64_t seed, int num_classes, std::size_t depth,
                         std::size_t height, std::size_t width) {
  if (num_classes < kMinPhantomClasses) {
    throw std::invalid_argument("generate_phantom: need at least 4 classes, got " +
                                std::to_string(num_classes));
  }
  if (depth == 0 || height % 8 != 0 || width % 8 != 0) {
    throw std::invalid_argument("generate_phantom: extents must be multiples of 8");
  }
  if (height < 32 || width < 32 || depth < 4) {
    throw std::invalid_argument("generate_phantom: extents too small to host all classes");
  }
  Rng rng(seed);
  const auto H = static_cast<double>(height), W = static_cast<double>(width);
  const auto D = static_cast<double>(depth);
  const double cx = (W - 1) / 2 + rng.uniform(-2, 2);
  const double cy = (H - 1) / 2 + rng.uniform(-2, 2);
  const double ax = W * rng.uniform(0.24, 0.27);
  const double ay = H * rng.uniform(0.26, 0.29);
  const double az = 0.6 * D;
  const double tilt = rng.uniform(-0.15, 0.15);
  double phase[6];
  for (double& p : phase) p = rng.uniform(0, 2 * std::numbers::pi);
  const double vent_dx = rng.uniform(0.17, 0.23), vent_rx = rng.uniform(0.08, 0.11);
  const double vent_ry = rng.uniform(0.24, 0.30);

  // Blob placement in the central slices, inside the white matter.
  const double scale_xy = W / 64.0, scale_z = D / 8.0;
  std::vector<Blob> blobs;
  const int num_blobs = num_classes - kMinPhantomClasses;
  for (int j = 0; j < num_blobs; ++j) {
    const bool smallest = j == num_blobs - 1;
    const double rho = (smallest ? 2.3 : 3.0 + 0.5 * (j % 3)) * scale_xy;
    const double aspect = rng.uniform(0.8, 1.25);
    const double rz = (smallest ? 2.2 : 2.6) * scale_z;
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      const double r = rng.uniform(0.15, 0.65), t = rng.uniform(0, 2 * std::numbers::pi);
      Blob b{cx + r * ax * std::cos(t), cy + r * ay * std::sin(t),
             std::floor(D / 2) - static_cast<double>(rng.uniform_int(0, 1)), rho, rho * aspect, rz};
      // Keep clear of the ventricles and of earlier blobs.
      const double gap_x = std::abs(std::abs(b.x - cx) - vent_dx * ax) - vent_rx * ax;
      const double gap_y = std::abs(b.y - cy + 0.05 * ay) - vent_ry * ay;
      if (gap_x < b.rx + 0.5 && gap_y < b.ry + 0.5) continue;
      bool clear = true;
      for (const Blob& o : blobs) {
        const double d = std::hypot(b.x - o.x, b.y - o.y);
        if (d < std::max(b.rx, b.ry) + std::max(o.rx, o.ry) + 0.5) clear = false;
      }
      if (!clear) continue;
      blobs.push_back(b);
      placed = true;
    }
    if (!placed) {
      throw std::invalid_argument("generate_phantom: extents too small to host all classes");
    }
  }

  Phantom ph;
  ph.seed = seed;
  ph.labels = LabelVolume(depth, height, width, kBackground);
  for (std::size_t z = 0; z < depth; ++z) {
    const double zc = (static_cast<double>(z) + 0.5 - D / 2) / az;
    if (std::abs(zc) >= 1) continue;
    const double s = std::sqrt(1 - zc * zc);
    const double sv2 = 1 - (zc / 0.6) * (zc / 0.6);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double px = static_cast<double>(x) - cx, py = static_cast<double>(y) - cy;
        const double u = std::cos(tilt) * px + std::sin(tilt) * py;
        const double v = -std::sin(tilt) * px + std::cos(tilt) * py;
        const double nu = u / (ax * s), nv = v / (ay * s);
        const double r = std::hypot(nu, nv);
        const double theta = std::atan2(nv, nu);
        const double outer = 1 + 0.05 * std::sin(3 * theta + phase[0]) +
                             0.03 * std::sin(5 * theta + phase[1]);
        if (r > outer) continue;
        const double inner = 0.72 + 0.06 * std::sin(7 * theta + phase[2]) +
                             0.03 * std::sin(4 * theta + phase[3]);
        Label l = r < inner * outer ? kWhiteMatter : kGrayMatter;
        if (sv2 > 0) {
          const double sv = std::sqrt(sv2);
          const double eu = (std::abs(u) / ax - vent_dx) / (vent_rx * sv);
          const double ev = (v / ay + 0.05) / (vent_ry * sv);
          if (eu * eu + ev * ev <= 1) l = kVentricles;
        }
        if (l == kWhiteMatter || l == kGrayMatter) {
          for (int j = 0; j < num_blobs; ++j) {
            if (blobs[static_cast<std::size_t>(j)].contains(static_cast<double>(x),
                                                           static_cast<double>(y),
                                                           static_cast<double>(z))) {
              l = kMinPhantomClasses + j;
              break;
            }
          }
        }
        ph.labels.at(z, y, x) = l;
      }
    }
  }

  std::vector<bool> present(static_cast<std::size_t>(num_classes), false);
  for (Label l : ph.labels.labels) present[static_cast<std::size_t>(l)] = true;
  for (int l = 0; l < num_classes; ++l) {
    if (!present[static_cast<std::size_t>(l)]) {
      throw std::invalid_argument("generate_phantom: extents too small to host class " +
                                  std::to_string(l));
    }
  }

  // Piecewise-constant class means, in-plane 3x3 box blur (partial volume),
  // smooth multiplicative bias field, additive Gaussian noise.
  const double gain = rng.uniform(0.92, 1.08);
  const double fx = rng.uniform(0.5, 1.5), fy = rng.uniform(0.5, 1.5);
  ph.image = Tensor<float>({depth, height, width});
  std::vector<double> mean(height * width), blurred(height * width);
  for (std::size_t z = 0; z < depth; ++z) {
    for (std::size_t i = 0; i < height * width; ++i) {
      mean[i] = class_intensity(ph.labels.labels[z * height * width + i]);
    }
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        double acc = 0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
            const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(height) ||
                xx >= static_cast<std::ptrdiff_t>(width)) {
              continue;
            }
            acc += mean[static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx)];
            ++n;
          }
        }
        blurred[y * width + x] = acc / n;
      }
    }
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double bias =
            1 + 0.06 * std::sin(2 * std::numbers::pi * fx * static_cast<double>(x) / W + phase[4]) *
                    std::cos(2 * std::numbers::pi * fy * static_cast<double>(y) / H + phase[5]);
        const double v = gain * bias * blurred[y * width + x] + kNoiseSigma * rng.normal();
        ph.image[(z * height + y) * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return ph;
}

void CorruptionConfig::validate() const {
  for (int r : erode_radius) {
    if (r < 0) throw std::invalid_argument("corruption: erode radius must be >= 0");
  }
  for (int r : dilate_radius) {
    if (r < 0) throw std::invalid_argument("corruption: dilate radius must be >= 0");
  }
  if (!(boundary_jitter >= 0 && boundary_jitter <= 1)) {
    throw std::invalid_argument("corruption: boundary jitter must lie in [0, 1]");
  }
  for (double p : mislabel_rate) {
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("corruption: mislabel rate must lie in [0, 1]");
  }
}

bool CorruptionConfig::is_identity() const {
  auto all_zero = [](const auto& v) {
    return std::all_of(v.begin(), v.end(), [](auto x) { return x == 0; });
  };
  return all_zero(erode_radius) && all_zero(dilate_radius) && boundary_jitter == 0 &&
         all_zero(mislabel_rate);
}

CorruptionConfig CorruptionConfig::tool_like(int num_classes, std::uint64_t seed) {
  CorruptionConfig c;
  const auto n = static_cast<std::size_t>(std::max(num_classes, 0));
  c.erode_radius.assign(n, 0);
  c.dilate_radius.assign(n, 0);
  c.mislabel_rate.assign(n, 0.0);
  c.seed = seed;
  c.boundary_jitter = 0.05;
  if (n > static_cast<std::size_t>(kVentricles)) c.dilate_radius[kVentricles] = 1;
  for (std::size_t l = kMinPhantomClasses; l < n; ++l) {
    // Alternate under- and over-segmentation of the small structures.
    if ((l - kMinPhantomClasses) % 2 == 0) {
      c.erode_radius[l] = 1;
    } else {
      c.dilate_radius[l] = 1;
    }
    c.mislabel_rate[l] = 0.15;
  }
  return c;
}

LabelSlice erode_class(const LabelSlice& s, Label cls, int radius) {
  LabelSlice out = s;
  if (radius <= 0) return out;
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      if (s.at(y, x) != cls) continue;
      const Label other = dominant_other(s, y, x, radius, cls, cls);
      if (other != cls) out.at(y, x) = other;
    }
  }
  return out;
}

LabelSlice dilate_class(const LabelSlice& s, Label cls, int radius) {
  LabelSlice out = s;
  if (radius <= 0) return out;
  const auto r = static_cast<std::ptrdiff_t>(radius);
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      if (s.at(y, x) == cls) continue;
      bool hit = false;
      for (std::ptrdiff_t dy = -r; dy <= r && !hit; ++dy) {
        for (std::ptrdiff_t dx = -r; dx <= r && !hit; ++dx) {
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(s.height) ||
              xx >= static_cast<std::ptrdiff_t>(s.width)) {
            continue;
          }
          hit = s.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) == cls;
        }
      }
      if (hit) out.at(y, x) = cls;
    }
  }
  return out;
}

LabelVolume corrupt_labels(const LabelVolume& gt, const CorruptionConfig& config) {
  config.validate();
  LabelVolume out = gt;
  if (config.is_identity()) return out;
  Rng rng(config.seed);
  Label max_label = 0;
  for (Label l : gt.labels) max_label = std::max(max_label, l);
  const auto num_labels = static_cast<std::size_t>(max_label) + 1;

  for (std::size_t z = 0; z < gt.depth; ++z) {
    LabelSlice s = out.slice(z);
    for (std::size_t l = 0; l < num_labels; ++l) {
      s = erode_class(s, static_cast<Label>(l), at_or_zero(config.erode_radius, l));
    }
    for (std::size_t l = 0; l < num_labels; ++l) {
      s = dilate_class(s, static_cast<Label>(l), at_or_zero(config.dilate_radius, l));
    }
    out.set_slice(z, s);
  }

  if (config.boundary_jitter > 0) {
    // Flip a fixed fraction (at least one) of boundary pixels to a
    // neighbouring label.
    std::vector<std::size_t> candidates;
    for (std::size_t z = 0; z < out.depth; ++z) {
      const std::vector<std::uint8_t> mask = boundary_mask(out.slice(z));
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) candidates.push_back(z * out.height * out.width + i);
      }
    }
    if (!candidates.empty()) {
      const auto count = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(config.boundary_jitter * candidates.size())));
      const std::vector<std::size_t> order = rng.permutation(candidates.size());
      const LabelVolume snapshot = out;
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t flat = candidates[order[k]];
        const std::size_t z = flat / (out.height * out.width);
        const std::size_t y = (flat / out.width) % out.height, x = flat % out.width;
        const Label own = snapshot.at(z, y, x);
        std::vector<Label> others;
        if (y > 0 && snapshot.at(z, y - 1, x) != own) others.push_back(snapshot.at(z, y - 1, x));
        if (y + 1 < out.height && snapshot.at(z, y + 1, x) != own) others.push_back(snapshot.at(z, y + 1, x));
        if (x > 0 && snapshot.at(z, y, x - 1) != own) others.push_back(snapshot.at(z, y, x - 1));
        if (x + 1 < out.width && snapshot.at(z, y, x + 1) != own) others.push_back(snapshot.at(z, y, x + 1));
        if (others.empty()) continue;
        out.at(z, y, x) = others[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(others.size()) - 1))];
      }
    }
  }

  for (std::size_t l = 0; l < num_labels; ++l) {
    const double rate = at_or_zero(config.mislabel_rate, l);
    if (rate <= 0) continue;
    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out.labels[i] == static_cast<Label>(l)) pixels.push_back(i);
    }
    if (pixels.empty()) continue;
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(rate * static_cast<double>(pixels.size()))));
    const std::vector<std::size_t> order = rng.permutation(pixels.size());
    const LabelVolume snapshot = out;
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t flat = pixels[order[k]];
      const std::size_t z = flat / (out.height * out.width);
      const std::size_t y = (flat / out.width) % out.height, x = flat % out.width;
      const LabelSlice s = snapshot.slice(z);
      Label host = static_cast<Label>(l);
      for (int radius = 1; host == static_cast<Label>(l) && radius <= 8; ++radius) {
        host = dominant_other(s, y, x, radius, static_cast<Label>(l), static_cast<Label>(l));
      }
      out.labels[flat] = host == static_cast<Label>(l) ? kBackground : host;
      if (out.labels[flat] == static_cast<Label>(l)) out.labels[flat] = l == 0 ? 1 : 0;
    }
  }
  return out;
}

std::vector<Sample> slice_volume(const Tensor<float>& image, const LabelVolume& labels) {
  if (image.rank() != 3 || image.dim(0) != labels.depth || image.dim(1) != labels.height ||
      image.dim(2) != labels.width) {
    throw ShapeError("slice_volume: image " + shape_to_string(image.shape()) +
                     " does not match label volume extents");
  }
  const std::size_t hw = labels.height * labels.width;
  std::vector<Sample> out;
  out.reserve(labels.depth);
  for (std::size_t z = 0; z < labels.depth; ++z) {
    std::vector<float> px(image.data() + z * hw, image.data() + (z + 1) * hw);
    out.push_back({Tensor<float>({labels.height, labels.width}, std::move(px)), labels.slice(z)});
  }
  return out;
}

std::vector<Sample> slice_dataset(std::span<const Tensor<float>> images,
                                  std::span<const LabelVolume> labels) {
  if (images.size() != labels.size()) {
    throw std::invalid_argument("slice_dataset: image and label counts differ");
  }
  std::vector<Sample> out;
  for (std::size_t v = 0; v < images.size(); ++v) {
    std::vector<Sample> s = slice_volume(images[v], labels[v]);
    std::move(s.begin(), s.end(), std::back_inserter(out));
  }
  return out;
}

std::pair<Tensor<float>, LabelVolume> assemble_volume(std::span<const Sample> slices) {
  if (slices.empty()) throw std::invalid_argument("assemble_volume: no slices");
  const std::size_t h = slices[0].labels.height, w = slices[0].labels.width;
  Tensor<float> image({slices.size(), h, w});
  LabelVolume labels(slices.size(), h, w);
  for (std::size_t z = 0; z < slices.size(); ++z) {
    if (slices[z].image.shape() != Shape{h, w}) {
      throw ShapeError("assemble_volume: slice " + std::to_string(z) + " has a different extent");
    }
    std::copy_n(slices[z].image.data(), h * w, image.data() + z * h * w);
    labels.set_slice(z, slices[z].labels);
  }
  return {std::move(image), std::move(labels)};
}

void AugmentationConfig::validate() const {
  if (max_translation < 0 || !(max_rotation >= 0)) {
    throw std::invalid_argument("augmentation bounds must be >= 0");
  }
}

RigidTransform sample_transform(const AugmentationConfig& config, std::uint64_t sample_seed) {
  config.validate();
  Rng rng(sample_seed);
  RigidTransform t;
  t.dx = static_cast<int>(rng.uniform_int(-config.max_translation, config.max_translation));
  t.dy = static_cast<int>(rng.uniform_int(-config.max_translation, config.max_translation));
  t.angle_deg = config.max_rotation > 0 ? rng.uniform(-config.max_rotation, config.max_rotation) : 0.0;
  return t;
}

namespace {

// Source coordinate of output pixel (x, y) under the inverse transform.
struct InverseMap {
  double cx, cy, c, s;
  RigidTransform t;
  InverseMap(std::size_t h, std::size_t w, const RigidTransform& tr)
      : cx((static_cast<double>(w) - 1) / 2), cy((static_cast<double>(h) - 1) / 2),
        c(std::cos(tr.angle_deg * std::numbers::pi / 180)),
        s(std::sin(tr.angle_deg * std::numbers::pi / 180)), t(tr) {}
  std::pair<double, double> operator()(std::size_t x, std::size_t y) const {
    const double u = static_cast<double>(x) - t.dx - cx;
    const double v = static_cast<double>(y) - t.dy - cy;
    return {c * u + s * v + cx, -s * u + c * v + cy};
  }
};

}  // namespace

Tensor<float> transform_image(const Tensor<float>& image, const RigidTransform& t) {
  if (image.rank() != 2) throw ShapeError("transform_image: expected (H, W)");
  const std::size_t h = image.dim(0), w = image.dim(1);
  Tensor<float> out({h, w});
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) -> double {
    return (y < 0 || x < 0 || y >= H || x >= W) ? 0.0
                                                : image[static_cast<std::size_t>(y * W + x)];
  };
  if (t.angle_deg == 0.0) {
    for (std::ptrdiff_t y = 0; y < H; ++y) {
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        out[static_cast<std::size_t>(y * W + x)] = static_cast<float>(px(y - t.dy, x - t.dx));
      }
    }
    return out;
  }
  const InverseMap map(h, w, t);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto [sx, sy] = map(x, y);
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const double ax = sx - fx0, ay = sy - fy0;
      const auto x0 = static_cast<std::ptrdiff_t>(fx0), y0 = static_cast<std::ptrdiff_t>(fy0);
      const double v = (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
                       ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
      out[y * w + x] = static_cast<float>(v);
    }
  }
  return out;
}

LabelSlice transform_labels(const LabelSlice& labels, const RigidTransform& t) {
  const std::size_t h = labels.height, w = labels.width;
  LabelSlice out(h, w, kBackground);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  const InverseMap map(h, w, t);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::ptrdiff_t sx, sy;
      if (t.angle_deg == 0.0) {
        sx = static_cast<std::ptrdiff_t>(x) - t.dx;
        sy = static_cast<std::ptrdiff_t>(y) - t.dy;
      } else {
        const auto [fx, fy] = map(x, y);
        sx = std::lround(fx);
        sy = std::lround(fy);
      }
      if (sx < 0 || sy < 0 || sx >= W || sy >= H) continue;
      out.at(y, x) = labels.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
    }
  }
  return out;
}

Sample apply_transform(const Sample& sample, const RigidTransform& t) {
  return {transform_image(sample.image, t), transform_labels(sample.labels, t)};
}

Sample augment(const Sample& sample, const AugmentationConfig& config, std::uint64_t sample_seed) {
  return apply_transform(sample, sample_transform(config, sample_seed));
}

void DatasetSplit::validate() const {
  std::vector<int> all;
  for (const auto* v : {&aux_train, &aux_val, &train, &val, &test}) all.insert(all.end(), v->begin(), v->end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
    throw std::invalid_argument("dataset split: volume ids are not disjoint");
  }
}

void DatasetSpec::validate() const {
  if (num_classes < kMinPhantomClasses) throw std::invalid_argument("dataset: num_classes must be >= 4");
  if (num_aux < 1 || num_aux_val < 0 || num_aux_val >= num_aux) {
    throw std::invalid_argument("dataset: need 0 <= aux_val < aux volumes");
  }
  if (num_train < 1 || num_val < 1 || num_test < 1) {
    throw std::invalid_argument("dataset: train, val and test splits must be non-empty");
  }
  if (depth == 0 || height % 8 != 0 || width % 8 != 0 || height == 0 || width == 0) {
    throw std::invalid_argument("dataset: extents must be positive and height, width multiples of 8");
  }
  if (corruption) corruption->validate();
}

std::string volume_dir_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "vol_%03d", id);
  return buf;
}

Tensor<float> label_volume_to_tensor(const LabelVolume& labels) {
  Tensor<float> t({labels.depth, labels.height, labels.width});
  for (std::size_t i = 0; i < labels.size(); ++i) t[i] = static_cast<float>(labels.labels[i]);
  return t;
}

LabelVolume tensor_to_label_volume(const Tensor<float>& t, int num_classes) {
  if (t.rank() != 3) throw FormatError("label volume must be 3-D, got " + shape_to_string(t.shape()));
  LabelVolume v(t.dim(0), t.dim(1), t.dim(2));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const float f = t[i];
    if (!(f >= 0) || f != std::floor(f) || f >= static_cast<float>(num_classes)) {
      throw FormatError("label value " + std::to_string(f) + " is not an integer in [0, " +
                        std::to_string(num_classes) + ")");
    }
    v.labels[i] = static_cast<Label>(f);
  }
  return v;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  atomic_write(path, [&](std::ostream& out) {
    const DatasetSpec& s = m.spec;
    out << "format=sdnet-dataset-1\n";
    out << "num_classes=" << s.num_classes << "\n";
    out << "depth=" << s.depth << "\nheight=" << s.height << "\nwidth=" << s.width << "\n";
    out << "seed=" << s.seed << "\n";
    out << "aux_train=" << join_ints(m.split.aux_train) << "\n";
    out << "aux_val=" << join_ints(m.split.aux_val) << "\n";
    out << "train=" << join_ints(m.split.train) << "\n";
    out << "val=" << join_ints(m.split.val) << "\n";
    out << "test=" << join_ints(m.split.test) << "\n";
    if (s.corruption) {
      out << "corrupt.erode=" << join_ints(s.corruption->erode_radius) << "\n";
      out << "corrupt.dilate=" << join_ints(s.corruption->dilate_radius) << "\n";
      out << "corrupt.jitter=" << join_doubles({s.corruption->boundary_jitter}) << "\n";
      out << "corrupt.mislabel=" << join_doubles(s.corruption->mislabel_rate) << "\n";
    }
  });
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("manifest line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("manifest " + path.string() + " lacks key '" + key + "'");
    return it->second;
  };
  if (get("format") != "sdnet-dataset-1") throw FormatError("unsupported manifest format");
  Manifest m;
  try {
    m.spec.num_classes = std::stoi(get("num_classes"));
    m.spec.depth = std::stoul(get("depth"));
    m.spec.height = std::stoul(get("height"));
    m.spec.width = std::stoul(get("width"));
    m.spec.seed = std::stoull(get("seed"));
    m.split.aux_train = parse_ints(get("aux_train"));
    m.split.aux_val = parse_ints(get("aux_val"));
    m.split.train = parse_ints(get("train"));
    m.split.val = parse_ints(get("val"));
    m.split.test = parse_ints(get("test"));
    if (kv.count("corrupt.erode")) {
      CorruptionConfig c;
      c.erode_radius = parse_ints(get("corrupt.erode"));
      c.dilate_radius = parse_ints(get("corrupt.dilate"));
      c.boundary_jitter = std::stod(get("corrupt.jitter"));
      c.mislabel_rate = parse_doubles(get("corrupt.mislabel"));
      m.spec.corruption = c;
    }
  } catch (const std::logic_error& e) {
    throw FormatError("malformed manifest value in " + path.string() + ": " + e.what());
  }
  m.spec.num_aux = static_cast<int>(m.split.aux_train.size() + m.split.aux_val.size());
  m.spec.num_aux_val = static_cast<int>(m.split.aux_val.size());
  m.spec.num_train = static_cast<int>(m.split.train.size());
  m.spec.num_val = static_cast<int>(m.split.val.size());
  m.spec.num_test = static_cast<int>(m.split.test.size());
  m.split.validate();
  return m;
}

Manifest generate_dataset(const DatasetSpec& spec_in, const fs::path& root, bool force) {
  DatasetSpec spec = spec_in;
  spec.validate();
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!force) {
      throw std::runtime_error("output directory " + root.string() +
                               " is not empty (use --force to overwrite)");
    }
    for (const auto& entry : fs::directory_iterator(root)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("vol_", 0) == 0 || name == "manifest.txt") fs::remove_all(entry.path());
    }
  }
  fs::create_directories(root);

  Manifest m;
  int id = 0;
  for (int i = 0; i < spec.num_aux; ++i, ++id) {
    (i < spec.num_aux - spec.num_aux_val ? m.split.aux_train : m.split.aux_val).push_back(id);
  }
  for (int i = 0; i < spec.num_train; ++i) m.split.train.push_back(id++);
  for (int i = 0; i < spec.num_val; ++i) m.split.val.push_back(id++);
  for (int i = 0; i < spec.num_test; ++i) m.split.test.push_back(id++);
  if (!spec.corruption) spec.corruption = CorruptionConfig::tool_like(spec.num_classes, 0);
  m.spec = spec;

  for (int v = 0; v < id; ++v) {
    const Phantom ph = generate_phantom(derive_seed(spec.seed, "data", static_cast<std::uint64_t>(v)),
                                        spec.num_classes, spec.depth, spec.height, spec.width);
    CorruptionConfig cc = *spec.corruption;
    cc.seed = derive_seed(spec.seed, "corrupt", static_cast<std::uint64_t>(v));
    const fs::path dir = root / volume_dir_name(v);
    fs::create_directories(dir);
    save_tensor(dir / "image.sdt", ph.image);
    save_tensor(dir / "labels_aux.sdt", label_volume_to_tensor(corrupt_labels(ph.labels, cc)));
    if (v >= spec.num_aux) save_tensor(dir / "labels_manual.sdt", label_volume_to_tensor(ph.labels));
  }
  write_manifest(m, root / "manifest.txt");
  return m;
}

Tensor<float> load_image_volume(const fs::path& root, int id) {
  Tensor<float> t = load_tensor(root / volume_dir_name(id) / "image.sdt");
  if (t.rank() != 3) throw FormatError("image volume must be 3-D");
  return t;
}

LabelVolume load_label_volume(const fs::path& root, int id, LabelSource source) {
  const char* file = source == LabelSource::kManual ? "labels_manual.sdt" : "labels_aux.sdt";
  const fs::path path = root / volume_dir_name(id) / file;
  if (!fs::exists(path)) throw std::runtime_error("missing label file " + path.string());
  // The class bound is checked by load_volume_set; accept any integer here.
  return tensor_to_label_volume(load_tensor(path), 1 << 20);
}

std::vector<Sample> VolumeSet::samples() const { return slice_dataset(images, labels); }

VolumeSet load_volume_set(const fs::path& root, std::span<const int> ids, LabelSource source,
                          int num_classes) {
  VolumeSet set;
  for (int id : ids) {
    Tensor<float> image = load_image_volume(root, id);
    LabelVolume labels = load_label_volume(root, id, source);
    if (image.dim(0) != labels.depth || image.dim(1) != labels.height || image.dim(2) != labels.width) {
      throw FormatError("volume " + std::to_string(id) + ": image and labels differ in extent");
    }
    for (Label l : labels.labels) {
      if (l >= num_classes) {
        throw FormatError("volume " + std::to_string(id) + ": label " + std::to_string(l) +
                          " exceeds the " + std::to_string(num_classes) + "-class range");
      }
    }
    set.ids.push_back(id);
    set.images.push_back(std::move(image));
    set.labels.push_back(std::move(labels));
  }
  return set;
}

}  // namespace sdnet
