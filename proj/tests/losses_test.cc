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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "sdnet/losses.h"
#include "sdnet/rng.h"

using namespace sdnet;

namespace {

// (1, N, H, W) one-hot probabilities of `s`.
Tensor<double> one_hot(const LabelSlice& s, int n) {
  Tensor<double> p({1, static_cast<std::size_t>(n), s.height, s.width});
  for (std::size_t i = 0; i < s.size(); ++i) p[static_cast<std::size_t>(s.labels[i]) * s.size() + i] = 1.0;
  return p;
}

LabelSlice random_slice(Rng& rng, std::size_t h, std::size_t w, int n) {
  LabelSlice s(h, w);
  for (auto& l : s.labels) l = static_cast<Label>(rng.uniform_int(0, n - 1));
  return s;
}

Tensor<double> random_probs(Rng& rng, std::size_t b, int n, std::size_t h, std::size_t w) {
  Tensor<double> p({b, static_cast<std::size_t>(n), h, w});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t i = 0; i < h * w; ++i) {
      double s = 0;
      for (int c = 0; c < n; ++c) s += p[(bi * n + c) * h * w + i] = rng.uniform(0.05, 1.0);
      for (int c = 0; c < n; ++c) p[(bi * n + c) * h * w + i] /= s;
    }
  return p;
}

}  // namespace

TEST_CASE("median of odd and even sizes") {
  const std::vector<double> odd{3, 1, 2}, even{4, 1, 3, 2};
  CHECK(median(odd) == 2.0);
  CHECK(median(even) == 2.5);
}

TEST_CASE("class_frequencies hand counts") {
  const std::vector<LabelSlice> corpus{LabelSlice(2, 2, std::vector<Label>{0, 0, 0, 1})};
  const ClassFrequencies f = class_frequencies(corpus, 2);
  CHECK(f.f == std::vector<double>{0.75, 0.25});

  const std::vector<LabelSlice> one{LabelSlice(3, 3, 2)};
  CHECK(class_frequencies(one, 3).f == std::vector<double>{0, 0, 1});

  Rng rng(1);
  std::vector<LabelSlice> many;
  for (int i = 0; i < 5; ++i) many.push_back(random_slice(rng, 7, 5, 4));
  const auto g = class_frequencies(many, 4).f;
  CHECK(std::accumulate(g.begin(), g.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS(class_frequencies(std::vector<LabelSlice>{}, 2));
}

TEST_CASE("boundary_mask neighbour rule") {
  CHECK(boundary_mask(LabelSlice(4, 4, 3)) == std::vector<std::uint8_t>(16, 0));

  LabelSlice centre(3, 3, 0);
  centre.at(1, 1) = 1;
  CHECK(boundary_mask(centre) == std::vector<std::uint8_t>{0, 1, 0, 1, 1, 1, 0, 1, 0});

  LabelSlice split(4, 4, 0);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 2; x < 4; ++x) split.at(y, x) = 1;
  const auto m = boundary_mask(split);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) CHECK(m[y * 4 + x] == ((x == 1 || x == 2) ? 1 : 0));
}

TEST_CASE("mfb_weights: uniform frequencies give ones") {
  const ClassFrequencies f{{1.0 / 3, 1.0 / 3, 1.0 / 3}};
  const WeightMap w = mfb_weights(LabelSlice(3, 3, 1), f, 5.0);
  for (double v : w.weights) CHECK(v == 1.0);
}

TEST_CASE("mfb_weights: imbalanced frequencies and boundary term") {
  const ClassFrequencies f{{0.88, 0.10, 0.02}};
  const std::vector<double> expect{0.10 / 0.88, 0.10 / 0.10, 0.10 / 0.02};
  const auto cw = mfb_class_weights(f);
  for (int l = 0; l < 3; ++l) CHECK(std::abs(cw[l] - expect[l]) < 1e-12);
  CHECK(std::abs(cw[0] - 0.11364) < 1e-5);

  for (Label l = 0; l < 3; ++l) {
    const WeightMap w = mfb_weights(LabelSlice(3, 3, l), f, 5.0);
    for (double v : w.weights) CHECK(std::abs(v - expect[l]) < 1e-12);
  }

  LabelSlice s(3, 3, 0);
  s.at(1, 1) = 1;
  const WeightMap w = mfb_weights(s, f, 5.0);
  CHECK(std::abs(w.at(1, 1) - 6.0) < 1e-12);
  CHECK(std::abs(w.at(0, 1) - (expect[0] + 5.0)) < 1e-12);
  CHECK(std::abs(w.at(0, 0) - expect[0]) < 1e-12);
}

TEST_CASE("mfb_weights rejects a present class with zero frequency") {
  const ClassFrequencies f{{0.5, 0.5, 0.0}};
  CHECK_THROWS(mfb_weights(LabelSlice(2, 2, 2), f, 5.0));
}

TEST_CASE("mfb_weights: omega0 moves only boundary pixels") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const LabelSlice s = random_slice(rng, 6, 7, 3);
    const ClassFrequencies f{{0.6, 0.3, 0.1}};
    const WeightMap a = mfb_weights(s, f, 2.5), b = mfb_weights(s, f, 5.0);
    const auto mask = boundary_mask(s);
    const auto cw = mfb_class_weights(f);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs(b.weights[i] - a.weights[i] - (mask[i] ? 2.5 : 0.0)) < 1e-12);
      if (!mask[i]) CHECK(a.weights[i] == cw[static_cast<std::size_t>(s.labels[i])]);
    }
  }
}

TEST_CASE("ecb_weights hand example") {
  const auto w = ecb_weights({{0.90, 0.50, 0.70}, 1}, 0.05);
  // m = 0.45, median 0.70
  const double m = 0.50 - 0.05;
  CHECK(std::abs(w[0] - (0.70 - m) / (0.90 - m)) < 1e-12);
  CHECK(std::abs(w[0] - 0.25 / 0.45) < 1e-12);
  CHECK(std::abs(w[1] - 5.0) < 1e-12);
  CHECK(std::abs(w[2] - 1.0) < 1e-12);

  for (double v : ecb_weights({{0.6, 0.6, 0.6, 0.6}, 1}, 0.05)) CHECK(v == 1.0);
  CHECK_THROWS(ecb_weights({{0.5, 0.6}, 1}, 0.0));
}

TEST_CASE("ecb_weights properties on random accuracy vectors") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 3 + 2 * static_cast<int>(rng.uniform_int(0, 3));  // odd: median is an entry
    AccuracyVector a;
    for (int l = 0; l < n; ++l) a.a.push_back(rng.uniform());
    const auto w = ecb_weights(a, 0.05);
    const auto med_it = std::find(a.a.begin(), a.a.end(), median(a.a));
    REQUIRE(med_it != a.a.end());
    CHECK(std::abs(w[med_it - a.a.begin()] - 1.0) < 1e-12);
    const auto wmax = std::max_element(w.begin(), w.end()) - w.begin();
    CHECK(a.a[wmax] == *std::min_element(a.a.begin(), a.a.end()));
    for (double v : w) CHECK((std::isfinite(v) && v > 0));
    // lowering one accuracy (keeping it off the median and min) raises its weight
    for (int l = 0; l < n; ++l) {
      for (int k = 0; k < n; ++k) {
        if (a.a[l] > a.a[k]) CHECK(w[l] < w[k]);
      }
    }
  }
}

TEST_CASE("composite loss: perfect prediction") {
  Rng rng(4);
  const LabelSlice s = random_slice(rng, 4, 4, 3);
  const std::vector<double> w(16, 1.0);
  const LossTerms t = composite_loss_terms(one_hot(s, 3), s.labels, w, LossConfig{});
  CHECK(t.logistic == 0.0);
  for (double d : t.dice) CHECK(d == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.total == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("composite loss: two-pixel logistic hand value") {
  const Tensor<double> p({1, 2, 1, 2}, 0.5);
  const std::vector<Label> labels{0, 1};
  const std::vector<double> w{1.0, 1.0};
  LossConfig cfg;
  cfg.use_dice = false;
  const LossTerms t = composite_loss_terms(p, labels, w, cfg);
  CHECK(std::abs(t.total - (-2.0 * std::log(0.5))) < 1e-12);
  CHECK(std::abs(t.total - 1.38629) < 1e-5);
}

TEST_CASE("composite loss rejects unnormalized probabilities") {
  Tensor<double> p({1, 2, 1, 2}, 0.5);
  p[0] = 0.6;
  const std::vector<Label> labels{0, 1};
  const std::vector<double> w{1.0, 1.0};
  CHECK_THROWS_AS(composite_loss_terms(p, labels, w, LossConfig{}), std::invalid_argument);
}

TEST_CASE("composite loss structural properties") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_probs(rng, 2, 4, 5, 5);
    std::vector<Label> labels(50);
    for (auto& l : labels) l = static_cast<Label>(rng.uniform_int(0, 3));
    std::vector<double> w(50);
    for (auto& x : w) x = rng.uniform(0.0, 6.0);

    LossConfig with, without;
    without.use_dice = false;
    const LossTerms a = composite_loss_terms(p, labels, w, with);
    const LossTerms b = composite_loss_terms(p, labels, w, without);
    CHECK(a.logistic >= 0);
    for (double d : a.dice) CHECK((d > 0 && d <= 1));
    CHECK(b.total == b.logistic);
    CHECK(a.logistic == b.logistic);

    // direct oracle of the weighted logistic sum
    double oracle = 0;
    for (std::size_t bi = 0; bi < 2; ++bi)
      for (std::size_t i = 0; i < 25; ++i) {
        const auto l = static_cast<std::size_t>(labels[bi * 25 + i]);
        oracle -= w[bi * 25 + i] * std::log(p[(bi * 4 + l) * 25 + i]);
      }
    CHECK(a.logistic == doctest::Approx(oracle).epsilon(1e-12));

    std::vector<double> w3(w);
    for (auto& x : w3) x *= 3.0;
    const LossTerms c = composite_loss_terms(p, labels, w3, with);
    CHECK(c.logistic == doctest::Approx(3.0 * a.logistic).epsilon(1e-12));
    CHECK(c.dice_mean == a.dice_mean);

    LossConfig mean = with;
    mean.reduction = LogisticReduction::kMean;
    CHECK(composite_loss_terms(p, labels, w, mean).logistic ==
          doctest::Approx(a.logistic / 50).epsilon(1e-12));
  }
}

TEST_CASE("composite loss soft Dice matches its definition") {
  Rng rng(6);
  const auto p = random_probs(rng, 1, 3, 4, 4);
  const LabelSlice s = random_slice(rng, 4, 4, 3);
  const std::vector<double> w(16, 1.0);
  const LossTerms t = composite_loss_terms(p, s.labels, w, LossConfig{});
  double mean = 0;
  for (int l = 0; l < 3; ++l) {
    double inter = 0, pp = 0, gg = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double pv = p[l * 16 + i], g = s.labels[i] == l ? 1.0 : 0.0;
      inter += pv * g;
      pp += pv * pv;
      gg += g * g;
    }
    const double d = (2 * inter + 1e-6) / (pp + gg + 1e-6);
    CHECK(t.dice[l] == doctest::Approx(d).epsilon(1e-12));
    mean += d / 3;
  }
  CHECK(t.total == doctest::Approx(t.logistic - mean).epsilon(1e-12));
}

TEST_CASE("composite loss gradient w.r.t. logits matches central differences") {
  Rng rng(7);
  Tensor<double> logits({1, 3, 8, 8});
  for (double& v : logits.values()) v = 2 * rng.normal();
  const LabelSlice s = random_slice(rng, 8, 8, 3);
  std::vector<double> w(64);
  for (auto& x : w) x = rng.uniform(0.1, 6.0);
  const LossConfig cfg;
  auto value = [&](const Tensor<double>& z) {
    Tape<double> t;
    return t.value(composite_loss(t, softmax_channels(t, t.leaf(z)), s.labels, w, cfg))[0];
  };
  Tape<double> tape;
  const Var z = tape.leaf(logits);
  tape.backward(composite_loss(tape, softmax_channels(tape, z), s.labels, w, cfg));
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    Tensor<double> a = logits, b = logits;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    const double numeric = (value(a) - value(b)) / 2e-6;
    const double analytic = tape.grad(z)[i];
    CHECK(std::abs(analytic - numeric) / std::max({1e-6, std::abs(analytic), std::abs(numeric)}) <
          1e-3);
  }
}

TEST_CASE("loss config validation") {
  LossConfig c;
  c.q = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.omega0 = -1;
  CHECK_THROWS(c.validate());
  c = {};
  c.dice_epsilon = 0;
  CHECK_THROWS(c.validate());
}
