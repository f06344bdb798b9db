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
#include <limits>

#include "doctest.h"
#include "sdnet/autograd.h"
#include "sdnet/optim.h"
#include "sdnet/rng.h"

using namespace sdnet;

namespace {

Tensor<float> random_tensor(Rng& rng, const Shape& shape) {
  Tensor<float> t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

Tensor<float> conv(const Tensor<float>& x, const Tensor<float>& k, const Tensor<float>& b) {
  Tape<float> tape;
  return tape.value(conv2d(tape, tape.leaf(x), tape.leaf(k), tape.leaf(b)));
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(shape_to_string(t.shape()) == "(2,3,4)");
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 2}, std::vector<float>(3)), ShapeError);
  t[5] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(t.check_finite("t"), NumericError);
}

TEST_CASE("conv2d with the centre-one kernel is the identity") {
  Rng rng(1);
  const Tensor<float> x = random_tensor(rng, {1, 1, 5, 5});
  Tensor<float> k({1, 1, 7, 7});
  k.at(0, 0, 3, 3) = 1;
  CHECK(conv(x, k, Tensor<float>({1})) == x);

  const Tensor<float> big = random_tensor(rng, {2, 1, 16, 8});
  CHECK(conv(big, k, Tensor<float>({1})) == big);
}

TEST_CASE("conv2d zero padding: all-ones 3x3 input with all-ones 7x7 kernel") {
  const Tensor<float> y = conv(Tensor<float>({1, 1, 3, 3}, 1.0f), Tensor<float>({1, 1, 7, 7}, 1.0f),
                               Tensor<float>({1}));
  CHECK(y.at(0, 0, 1, 1) == 9.0f);
  CHECK(y.at(0, 0, 0, 0) == 9.0f);  // the 7x7 window still covers every input cell
}

TEST_CASE("conv2d matches a direct convolution") {
  Rng rng(2);
  const Tensor<float> x = random_tensor(rng, {2, 3, 8, 8});
  const Tensor<float> k = random_tensor(rng, {4, 3, 7, 7});
  const Tensor<float> b = random_tensor(rng, {4});
  const Tensor<float> y = conv(x, k, b);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t co = 0; co < 4; ++co)
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
          double s = b[co];
          for (std::size_t ci = 0; ci < 3; ++ci)
            for (int dy = -3; dy <= 3; ++dy)
              for (int dx = -3; dx <= 3; ++dx) {
                const int yy = static_cast<int>(i) + dy, xx = static_cast<int>(j) + dx;
                if (yy < 0 || xx < 0 || yy >= 8 || xx >= 8) continue;
                s += double(k.at(co, ci, dy + 3, dx + 3)) * x.at(n, ci, yy, xx);
              }
          CHECK(y.at(n, co, i, j) == doctest::Approx(s).epsilon(1e-4));
        }
}

TEST_CASE("conv2d rejects mismatched channels") {
  Tape<float> tape;
  const Var x = tape.leaf(Tensor<float>({1, 2, 4, 4}));
  const Var k = tape.leaf(Tensor<float>({1, 3, 7, 7}));
  const Var b = tape.leaf(Tensor<float>({1}));
  CHECK_THROWS_AS(conv2d(tape, x, k, b), ShapeError);
}

TEST_CASE("conv2d kernel gradient of sum(output) matches central differences") {
  Rng rng(3);
  const Tensor<double> x = random_tensor(rng, {1, 2, 6, 6}).cast<double>();
  const Tensor<double> k = random_tensor(rng, {2, 2, 7, 7}).cast<double>();
  const Tensor<double> b({2});
  const Tensor<double> ones({1, 2, 6, 6}, 1.0);
  Tape<double> tape;
  const Var kv = tape.leaf(k);
  tape.backward(weighted_sum(tape, conv2d(tape, tape.leaf(x), kv, tape.leaf(b)), ones));
  auto total = [&](const Tensor<double>& kk) {
    Tape<double> t;
    return t.value(weighted_sum(t, conv2d(t, t.leaf(x), t.leaf(kk), t.leaf(b)), ones))[0];
  };
  for (std::size_t i = 0; i < k.numel(); i += 7) {
    Tensor<double> kp = k, km = k;
    kp[i] += 1e-6;
    km[i] -= 1e-6;
    const double numeric = (total(kp) - total(km)) / 2e-6;
    const double analytic = tape.grad(kv)[i];
    CHECK(std::abs(analytic - numeric) / std::max({1e-6, std::abs(analytic), std::abs(numeric)}) <
          1e-3);
  }
}

TEST_CASE("batchnorm2d train mode on standardized input is the identity") {
  // Each channel holds +-1 in equal numbers: mean 0, biased variance 1.
  Tensor<float> x({2, 2, 2, 2});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = (i % 2) ? 1.0f : -1.0f;
  Tape<float> tape;
  BatchNormState<float> s = BatchNormState<float>::identity(2);
  const Var y = batchnorm2d(tape, tape.leaf(x), tape.leaf(s.gamma), tape.leaf(s.beta), s);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(tape.value(y)[i] == doctest::Approx(x[i]).epsilon(1e-3));
  // running stats moved by momentum 0.1 towards mean 0 and unbiased variance 8/7
  CHECK(s.running_mean[0] == doctest::Approx(0.0));
  CHECK(s.running_var[0] == doctest::Approx(0.9 + 0.1 * 8.0 / 7.0));
}

TEST_CASE("batchnorm2d with gamma 0 outputs beta") {
  Rng rng(4);
  Tape<float> tape;
  BatchNormState<float> s = BatchNormState<float>::identity(3);
  s.gamma.fill(0);
  s.beta[0] = 0.5f;
  s.beta[1] = -2.0f;
  const Var y = batchnorm2d(tape, tape.leaf(random_tensor(rng, {2, 3, 4, 4})), tape.leaf(s.gamma),
                            tape.leaf(s.beta), s);
  const Tensor<float>& out = tape.value(y);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 16; ++i) CHECK(out.at(n, c, i / 4, i % 4) == s.beta[c]);
}

TEST_CASE("batchnorm2d eval mode uses the documented initial statistics") {
  Rng rng(5);
  const Tensor<float> x = random_tensor(rng, {1, 2, 4, 4});
  Tape<float> tape;
  BatchNormState<float> s = BatchNormState<float>::identity(2);
  s.mode = BatchNormMode::kEval;
  const Var y = batchnorm2d(tape, tape.leaf(x), tape.leaf(s.gamma), tape.leaf(s.beta), s);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(tape.value(y)[i] == doctest::Approx(x[i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-6));
  }
}

TEST_CASE("relu values and subgradient") {
  Tape<float> tape;
  const Var x = tape.leaf(Tensor<float>({3}, std::vector<float>{-1, 0, 2}));
  const Var y = relu(tape, x);
  CHECK(tape.value(y) == Tensor<float>({3}, std::vector<float>{0, 0, 2}));
  tape.backward(weighted_sum(tape, y, Tensor<float>({3}, 1.0f)));
  CHECK(tape.grad(x) == Tensor<float>({3}, std::vector<float>{0, 0, 1}));

  Tape<float> t2;
  const Var a = t2.leaf(Tensor<float>({2}, std::vector<float>{-1, 3}));
  t2.backward(weighted_sum(t2, relu(t2, a), Tensor<float>({2}, 1.0f)));
  CHECK(t2.grad(a) == Tensor<float>({2}, std::vector<float>{0, 1}));

  Tape<float> t3;
  const Var neg = t3.leaf(Tensor<float>({4}, -1.5f));
  const Var out = relu(t3, neg);
  t3.backward(weighted_sum(t3, out, Tensor<float>({4}, 1.0f)));
  CHECK(t3.value(out) == Tensor<float>({4}, 0.0f));
  CHECK(t3.grad(neg) == Tensor<float>({4}, 0.0f));
}

TEST_CASE("maxpool2x2 values, indices and tie-break") {
  Tape<float> tape;
  const PoolResult r = maxpool2x2(tape, tape.leaf(Tensor<float>({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4})));
  CHECK(tape.value(r.output)[0] == 4.0f);
  CHECK(r.indices.window_pos[0] == 3);

  const PoolResult c = maxpool2x2(tape, tape.leaf(Tensor<float>({1, 1, 4, 4}, 7.0f)));
  CHECK(tape.value(c.output) == Tensor<float>({1, 1, 2, 2}, 7.0f));
  for (auto p : c.indices.window_pos) CHECK(p == 0);

  CHECK_THROWS_AS(maxpool2x2(tape, tape.leaf(Tensor<float>({1, 1, 3, 4}))), ShapeError);
}

TEST_CASE("maxpool2x2 routes the gradient to the argmax") {
  Tape<float> tape;
  const Var x = tape.leaf(Tensor<float>({1, 1, 2, 4}, std::vector<float>{1, 5, 2, 0, 3, 2, 9, 1}));
  const PoolResult r = maxpool2x2(tape, x);
  tape.backward(weighted_sum(tape, r.output, Tensor<float>({1, 1, 1, 2}, std::vector<float>{2, 3})));
  CHECK(tape.grad(x) == Tensor<float>({1, 1, 2, 4}, std::vector<float>{0, 2, 0, 0, 0, 0, 3, 0}));
}

TEST_CASE("unpool2x2 places values at recorded positions") {
  Tape<float> tape;
  const PoolResult r = maxpool2x2(tape, tape.leaf(Tensor<float>({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4})));
  const Var u = unpool2x2(tape, r.output, r.indices);
  CHECK(tape.value(u) == Tensor<float>({1, 1, 2, 2}, std::vector<float>{0, 0, 0, 4}));

  PoolIndices wrong = r.indices;
  wrong.shape = {1, 1, 2, 2};
  CHECK_THROWS_AS(unpool2x2(tape, r.output, wrong), ShapeError);
}

TEST_CASE("unpool keeps window maxima in place and zeros elsewhere") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Tape<float> tape;
    const Tensor<float> x = random_tensor(rng, {2, 3, 8, 8});
    const PoolResult p = maxpool2x2(tape, tape.leaf(x));
    const Tensor<float>& up = tape.value(unpool2x2(tape, p.output, p.indices));
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 8; y += 2)
          for (std::size_t xx = 0; xx < 8; xx += 2) {
            int nonzero = 0;
            for (std::size_t k = 0; k < 4; ++k) {
              const float v = up.at(n, c, y + k / 2, xx + k % 2);
              if (v != 0.0f) {
                ++nonzero;
                CHECK(v == x.at(n, c, y + k / 2, xx + k % 2));
                CHECK(v == tape.value(p.output).at(n, c, y / 2, xx / 2));
              }
            }
            CHECK(nonzero <= 1);
          }
  }
}

// Network activations entering a pool are post-ReLU, hence non-negative.
TEST_CASE("pool -> unpool -> pool round trip on positive activations") {
  Rng rng(7);
  Tape<float> tape;
  Tensor<float> x = random_tensor(rng, {1, 4, 8, 8});
  for (float& v : x.values()) v = std::abs(v) + 0.01f;
  const PoolResult p = maxpool2x2(tape, tape.leaf(x));
  const PoolResult again = maxpool2x2(tape, unpool2x2(tape, p.output, p.indices));
  CHECK(tape.value(again.output) == tape.value(p.output));
  CHECK(again.indices.window_pos == p.indices.window_pos);
}

TEST_CASE("concat_channels layout and gradient split") {
  Rng rng(8);
  Tape<float> tape;
  const Tensor<float> a = random_tensor(rng, {1, 2, 4, 4});
  const Tensor<float> b = random_tensor(rng, {1, 3, 4, 4});
  const Var av = tape.leaf(a), bv = tape.leaf(b);
  const Var c = concat_channels(tape, av, bv);
  CHECK(tape.value(c).shape() == Shape{1, 5, 4, 4});
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(tape.value(c)[i] == a[i]);
  for (std::size_t i = 0; i < b.numel(); ++i) CHECK(tape.value(c)[a.numel() + i] == b[i]);

  const Var e = tape.leaf(Tensor<float>({1, 0, 4, 4}));
  CHECK(tape.value(concat_channels(tape, av, e)) == a);

  Tensor<float> w({1, 5, 4, 4});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(i);
  tape.backward(weighted_sum(tape, c, w));
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(tape.grad(av)[i] == w[i]);
  for (std::size_t i = 0; i < b.numel(); ++i) CHECK(tape.grad(bv)[i] == w[a.numel() + i]);

  CHECK_THROWS_AS(concat_channels(tape, av, tape.leaf(Tensor<float>({1, 1, 2, 4}))), ShapeError);
}

TEST_CASE("softmax_channels normalization and stability") {
  Tape<float> tape;
  const Var z = softmax_channels(tape, tape.leaf(Tensor<float>({1, 2, 1, 1})));
  CHECK(tape.value(z)[0] == 0.5f);
  CHECK(tape.value(z)[1] == 0.5f);

  const Var big = softmax_channels(tape, tape.leaf(Tensor<float>({1, 2, 1, 1}, std::vector<float>{1000, 0})));
  CHECK(std::isfinite(tape.value(big)[0]));
  CHECK(tape.value(big)[0] == doctest::Approx(1.0));
  CHECK(tape.value(big)[1] == doctest::Approx(0.0));

  Rng rng(9);
  Tensor<float> logits = random_tensor(rng, {3, 5, 6, 6});
  for (float& v : logits.values()) v *= 4;
  const Tensor<float>& p = tape.value(softmax_channels(tape, tape.leaf(logits)));
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < 36; ++i) {
      double s = 0;
      for (std::size_t c = 0; c < 5; ++c) {
        const float v = p.at(n, c, i / 6, i % 6);
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
        s += v;
      }
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("operations are deterministic") {
  Rng rng(10);
  const Tensor<float> x = random_tensor(rng, {2, 3, 8, 8});
  const Tensor<float> k = random_tensor(rng, {4, 3, 7, 7});
  auto run = [&] {
    Tape<float> tape;
    const Var xv = tape.leaf(x), kv = tape.leaf(k);
    BatchNormState<float> s = BatchNormState<float>::identity(4);
    const Var y = softmax_channels(
        tape, relu(tape, batchnorm2d(tape, conv2d(tape, xv, kv, tape.leaf(Tensor<float>({4}))),
                                     tape.leaf(s.gamma), tape.leaf(s.beta), s)));
    tape.backward(weighted_sum(tape, y, Tensor<float>({2, 4, 8, 8}, 0.3f)));
    return std::make_pair(tape.value(y), tape.grad(kv));
  };
  const auto a = run(), b = run();
  CHECK(bit_identical(a.first, b.first));
  CHECK(bit_identical(a.second, b.second));
}

TEST_CASE("sgd_step hand values") {
  auto step = [](float w, float g, SgdState& st, SgdOptions opt) {
    Tensor<float> wt({1}, w);
    const Tensor<float> gt({1}, g);
    Tensor<float>* ps[] = {&wt};
    const Tensor<float>* gs[] = {&gt};
    sgd_step(ps, gs, st, opt);
    return wt[0];
  };
  SgdState s1;
  CHECK(step(1.0f, 0.5f, s1, {0.1, 0.0, 0.0}) == doctest::Approx(0.95).epsilon(1e-7));
  SgdState s2;
  CHECK(step(1.0f, 0.5f, s2, {0.1, 0.0, 1e-4}) == doctest::Approx(0.94999).epsilon(1e-7));

  SgdState s3;
  const float w1 = step(0.0f, 1.0f, s3, {0.1, 0.9, 0.0});
  CHECK(s3.velocity[0][0] == doctest::Approx(1.0));
  CHECK(w1 == doctest::Approx(-0.1));
  const float w2 = step(w1, 1.0f, s3, {0.1, 0.9, 0.0});
  CHECK(s3.velocity[0][0] == doctest::Approx(1.9));
  CHECK(w2 == doctest::Approx(-0.29));
}

TEST_CASE("sgd_step refuses non-finite gradients without touching parameters") {
  Tensor<float> a({2}, 1.0f), b({2}, 2.0f);
  const Tensor<float> ga({2}, 0.5f);
  Tensor<float> gb({2}, 0.5f);
  gb[1] = std::numeric_limits<float>::infinity();
  Tensor<float>* ps[] = {&a, &b};
  const Tensor<float>* gs[] = {&ga, &gb};
  SgdState st;
  CHECK_THROWS_AS(sgd_step(ps, gs, st, {}), NumericError);
  CHECK(a == Tensor<float>({2}, 1.0f));
  CHECK(b == Tensor<float>({2}, 2.0f));
}
