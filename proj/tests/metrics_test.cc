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

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sdnet/metrics.h"
#include "sdnet/rng.h"

using namespace sdnet;

namespace {

LabelVolume random_volume(Rng& rng, int n) {
  LabelVolume v(2, 4, 4);
  for (auto& l : v.labels) l = static_cast<Label>(rng.uniform_int(0, n - 1));
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

TEST_CASE("dice_per_class hand counts") {
  // |P| = 6, |G| = 4, overlap 3 for class 1
  const std::vector<Label> pred{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  const std::vector<Label> gt{1, 1, 1, 0, 0, 0, 1, 0, 0, 0};
  const auto d = dice_per_class(pred, gt, 3);
  CHECK(d[1] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(d[2] == 1.0);  // absent from both
  CHECK(d[0] == doctest::Approx(2.0 * 3 / (4 + 6)).epsilon(1e-12));

  const std::vector<Label> a{1, 1, 0, 0}, b{0, 0, 1, 1};
  CHECK(dice_per_class(a, b, 2)[1] == 0.0);
  CHECK(dice_per_class(a, a, 2) == std::vector<double>{1.0, 1.0});
  CHECK_THROWS(dice_per_class(a, std::vector<Label>{0, 1}, 2));
}

TEST_CASE("dice hand-built 4x4 confusion case") {
  const std::vector<Label> gt{0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 0, 0, 2, 2, 0, 0};
  const std::vector<Label> pr{0, 1, 1, 1, 0, 0, 0, 1, 2, 0, 0, 0, 2, 2, 2, 0};
  // class 1: TP 3, FP 1, FN 1; class 2: TP 3, FP 1, FN 1; class 0: TP 6, FP 2, FN 2
  ConfusionCounts c(3);
  c.add(pr, gt);
  const auto d = c.dice();
  CHECK(d[1] == doctest::Approx(6.0 / 8.0));
  CHECK(d[2] == doctest::Approx(6.0 / 8.0));
  CHECK(d[0] == doctest::Approx(12.0 / 16.0));
  CHECK(dice_per_class(pr, gt, 3) == d);
}

TEST_CASE("dice symmetry and permutation equivariance") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const LabelVolume a = random_volume(rng, 4), b = random_volume(rng, 4);
    const auto ab = dice_per_class(a, b, 4), ba = dice_per_class(b, a, 4);
    CHECK(ab == ba);
    const std::vector<Label> perm{2, 0, 3, 1};
    LabelVolume pa = a, pb = b;
    for (auto& l : pa.labels) l = perm[static_cast<std::size_t>(l)];
    for (auto& l : pb.labels) l = perm[static_cast<std::size_t>(l)];
    const auto p = dice_per_class(pa, pb, 4);
    for (std::size_t l = 0; l < 4; ++l) CHECK(p[static_cast<std::size_t>(perm[l])] == ab[l]);
    for (double v : ab) CHECK((v >= 0 && v <= 1));
  }
}

TEST_CASE("report aggregation on a two-volume fixture") {
  LabelVolume g1(1, 2, 2), g2(1, 2, 2), p1(1, 2, 2), p2(1, 2, 2);
  g1.labels = {0, 1, 1, 2};
  p1.labels = {0, 1, 2, 2};  // dice: bg 1, c1 2/3, c2 2/3
  g2.labels = {0, 0, 1, 2};
  p2.labels = {0, 0, 1, 1};  // dice: bg 1, c1 2/3, c2 0
  const std::vector<int> ids{4, 9};
  const std::vector<LabelVolume> preds{p1, p2}, gts{g1, g2};
  const DiceReport r = build_report(ids, preds, gts, 3);
  CHECK(r.class_mean[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.class_mean[2] == doctest::Approx(1.0 / 3.0));
  CHECK(r.class_std[2] == doctest::Approx(std::sqrt(2.0 * (1.0 / 3.0) * (1.0 / 3.0))));
  CHECK(r.volume_mean[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.volume_mean[1] == doctest::Approx(1.0 / 3.0));
  CHECK(r.overall_mean == doctest::Approx(0.5));
  CHECK(r.min_class_mean() == doctest::Approx(1.0 / 3.0));
  CHECK(r.volume_freq[0][1] == doctest::Approx(0.5));
}

TEST_CASE("perfect and constant predictors") {
  Rng rng(2);
  VolumeSet set;
  for (int v = 0; v < 3; ++v) {
    set.ids.push_back(v);
    set.images.emplace_back(Shape{2, 4, 4});
    LabelVolume lv = random_volume(rng, 3);
    lv.labels[0] = 1;
    lv.labels[1] = 2;
    set.labels.push_back(lv);
  }
  std::size_t call = 0;
  const DiceReport perfect = evaluate_volumes(
      [&](const Tensor<float>&) { return set.labels[call++]; }, set, 3);
  CHECK(perfect.overall_mean == 1.0);
  CHECK(perfect.overall_std == 0.0);
  CHECK(perfect.seconds.size() == 3);

  const DiceReport flat =
      evaluate_volumes([](const Tensor<float>& img) { return LabelVolume(img.dim(0), img.dim(1), img.dim(2)); },
                       set, 3);
  CHECK(flat.class_mean[0] > 0.0);
  CHECK(flat.class_mean[1] == 0.0);
  CHECK(flat.class_mean[2] == 0.0);
}

TEST_CASE("report CSV rows recompute to the aggregate rows") {
  Rng rng(3);
  std::vector<LabelVolume> preds, gts;
  std::vector<int> ids;
  for (int v = 0; v < 4; ++v) {
    ids.push_back(10 + v);
    preds.push_back(random_volume(rng, 4));
    gts.push_back(random_volume(rng, 4));
  }
  const DiceReport r = build_report(ids, preds, gts, 4);
  std::stringstream csv;
  write_report_csv(csv, r);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "volume,class,dice,freq");
  std::vector<std::vector<double>> per_class(4);
  std::vector<double> agg(4), agg_std(4);
  double all_mean = -1, all_std = -1;
  while (std::getline(csv, line)) {
    const auto f = split(line);
    REQUIRE(f.size() >= 3);
    if (f[0] == "AGG" && f[1] == "all") {
      all_mean = std::stod(f[2]);
    } else if (f[0] == "AGG_STD" && f[1] == "all") {
      all_std = std::stod(f[2]);
    } else if (f[0] == "AGG") {
      agg[std::stoul(f[1])] = std::stod(f[2]);
    } else if (f[0] == "AGG_STD") {
      agg_std[std::stoul(f[1])] = std::stod(f[2]);
    } else {
      per_class[std::stoul(f[1])].push_back(std::stod(f[2]));
    }
  }
  std::vector<double> vol_means(4, 0.0);
  for (std::size_t l = 0; l < 4; ++l) {
    REQUIRE(per_class[l].size() == 4);
    double m = 0;
    for (double d : per_class[l]) m += d / 4;
    double ss = 0;
    for (double d : per_class[l]) ss += (d - m) * (d - m);
    CHECK(std::abs(agg[l] - m) < 1e-9);
    CHECK(std::abs(agg_std[l] - std::sqrt(ss / 3)) < 1e-9);
    if (l > 0) {
      for (std::size_t v = 0; v < 4; ++v) vol_means[v] += per_class[l][v] / 3;
    }
  }
  double m = 0;
  for (double d : vol_means) m += d / 4;
  double ss = 0;
  for (double d : vol_means) ss += (d - m) * (d - m);
  CHECK(std::abs(all_mean - m) < 1e-9);
  CHECK(std::abs(all_std - std::sqrt(ss / 3)) < 1e-9);
}

TEST_CASE("sample_std") {
  CHECK(sample_std(std::vector<double>{2.0}) == 0.0);
  CHECK(sample_std(std::vector<double>{1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(foreground_mean(std::vector<double>{0.1, 0.5, 1.0}) == doctest::Approx(0.75));
}
