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

#include "sdnet/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include "sdnet/autograd.h"
#include "sdnet/losses.h"
#include "sdnet/model.h"
#include "sdnet/rng.h"

namespace sdnet {

namespace {

using Fn = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({1e-6, std::abs(a), std::abs(n)});
}

Tensor<double> random_tensor(Rng& rng, const Shape& shape, double scale = 1.0) {
  Tensor<double> t(shape);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

// Coordinates probed in a tensor of `n` elements.
std::vector<std::size_t> probe_coords(Rng& rng, std::size_t n, std::size_t max_coords) {
  std::vector<std::size_t> out;
  if (n <= max_coords) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
  } else {
    for (std::size_t i = 0; i < max_coords; ++i) {
      out.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1)));
    }
  }
  return out;
}

// Compares the tape gradient of scalar `fn` w.r.t. each input with central
// differences; returns the worst relative error.
double check_fn(const std::vector<Tensor<double>>& inputs, const Fn& fn, Rng& rng,
                const GradCheckOptions& opt, std::size_t& checks) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.leaf(t));
    const Var out = fn(tape, vars);
    tape.backward(out);
    for (Var v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& t : xs) vars.push_back(tape.leaf(t, false));
    return tape.value(fn(tape, vars))[0];
  };
  double worst = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t c : probe_coords(rng, inputs[i].numel(), opt.max_coords)) {
      std::vector<Tensor<double>> xs = inputs;
      xs[i][c] = inputs[i][c] + opt.step;
      const double plus = eval(xs);
      xs[i][c] = inputs[i][c] - opt.step;
      const double minus = eval(xs);
      const double numeric = (plus - minus) / (2 * opt.step);
      worst = std::max(worst, rel_error(analytic[i][c], numeric));
      ++checks;
    }
  }
  return worst;
}

// Random projection to a scalar so every output element contributes.
Var project(Tape<double>& tape, Var out, std::uint64_t seed) {
  Rng rng(seed);
  return weighted_sum(tape, out, random_tensor(rng, tape.value(out).shape()));
}

// Values well separated from each other so no pooling window is near a tie.
Tensor<double> distinct_tensor(Rng& rng, const Shape& shape) {
  Tensor<double> t(shape);
  const std::vector<std::size_t> perm = rng.permutation(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 0.01 * static_cast<double>(perm[i]) - 1.0;
  return t;
}

// Values bounded away from the ReLU kink.
Tensor<double> off_kink_tensor(Rng& rng, const Shape& shape) {
  Tensor<double> t(shape);
  for (double& v : t.values()) {
    do {
      v = rng.normal();
    } while (std::abs(v) < 0.05);
  }
  return t;
}

// True when both passes took the same pooling argmax and encoder ReLU
// pattern, i.e. the perturbation did not cross a kink or a pooling switch.
bool same_branches(const ForwardTrace<double>& a, const ForwardTrace<double>& b) {
  for (std::size_t k = 0; k < kNumBlocks; ++k) {
    if (a.indices[k].window_pos != b.indices[k].window_pos) return false;
    for (std::size_t i = 0; i < a.skips[k].numel(); ++i) {
      if ((a.skips[k][i] > 0) != (b.skips[k][i] > 0)) return false;
    }
  }
  return true;
}

// Whole network plus loss w.r.t. every learnable tensor. Probes that cross a
// pooling switch (where the function jumps) are redrawn.
double check_network(Rng& rng, std::uint64_t seed, const GradCheckOptions& opt,
                     std::size_t& checks) {
  constexpr double kStep = 1e-4;  // loss roundoff dominates smaller steps
  constexpr int kMaxRedraws = 20;
  ModelConfig mc;
  mc.num_classes = 3;
  mc.channels = 4;
  mc.kernel_size = 7;
  const std::size_t b = 2, h = 16, w = 16;
  const Tensor<double> image = random_tensor(rng, {b, 1, h, w});
  std::vector<Label> labels(b * h * w);
  for (auto& l : labels) l = static_cast<Label>(rng.uniform_int(0, 2));
  std::vector<double> weights(b * h * w);
  for (auto& x : weights) x = rng.uniform(0.1, 6.0);
  LossConfig cfg;
  cfg.reduction = LogisticReduction::kMean;

  auto loss = [&](BasicParameters<double> p, Tape<double>& tape, ForwardPass<double>& pass) {
    pass = forward(tape, p, image, BatchNormMode::kTrain);
    return composite_loss(tape, pass.probs, labels, weights, cfg);
  };
  BasicParameters<double> probe = init_parameters(mc, seed).cast<double>();
  Tape<double> tape;
  ForwardPass<double> base;
  tape.backward(loss(probe, tape, base));

  double worst = 0;
  auto named = probe.learnable();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const Tensor<double>& grad = tape.grad(base.learnable[i]);
    Tensor<double>& x = *named[i].second;
    const std::size_t probes = std::min(x.numel(), std::max<std::size_t>(1, opt.max_coords / 3));
    for (std::size_t k = 0, redraws = 0; k < probes;) {
      const auto c = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(x.numel()) - 1));
      const double x0 = x[c];
      double f[2];
      bool smooth = true;
      for (int s = 0; s < 2; ++s) {
        x[c] = x0 + (s == 0 ? kStep : -kStep);
        Tape<double> t;
        ForwardPass<double> pass;
        f[s] = t.value(loss(probe, t, pass))[0];
        smooth = smooth && same_branches(base.trace, pass.trace);
      }
      x[c] = x0;
      if (!smooth && ++redraws <= kMaxRedraws) continue;
      worst = std::max(worst, rel_error(grad[c], (f[0] - f[1]) / (2 * kStep)));
      ++checks;
      ++k;
    }
  }
  return worst;
}

struct Case {
  std::string op;
  std::function<double(Rng&, std::uint64_t, std::size_t&)> run;
};

std::vector<Case> cases(const GradCheckOptions& opt) {
  std::vector<Case> out;
  auto simple = [&](std::string op, std::function<std::vector<Tensor<double>>(Rng&)> make,
                    std::function<Var(Tape<double>&, const std::vector<Var>&)> body) {
    out.push_back({op, [make, body, &opt](Rng& rng, std::uint64_t seed, std::size_t& checks) {
                     const auto inputs = make(rng);
                     const Fn fn = [&](Tape<double>& t, const std::vector<Var>& v) {
                       return project(t, body(t, v), seed);
                     };
                     return check_fn(inputs, fn, rng, opt, checks);
                   }});
  };

  simple("conv2d",
         [](Rng& r) {
           return std::vector{random_tensor(r, {2, 3, 6, 6}), random_tensor(r, {4, 3, 7, 7}, 0.3),
                              random_tensor(r, {4})};
         },
         [](Tape<double>& t, const std::vector<Var>& v) { return conv2d(t, v[0], v[1], v[2]); });
  // Kernel wider than the plane, as in the deepest block.
  simple("conv2d_small_plane",
         [](Rng& r) {
           return std::vector{random_tensor(r, {2, 8, 4, 4}), random_tensor(r, {3, 8, 7, 7}, 0.3),
                              random_tensor(r, {3})};
         },
         [](Tape<double>& t, const std::vector<Var>& v) { return conv2d(t, v[0], v[1], v[2]); });
  simple("conv2d_1x1",
         [](Rng& r) {
           return std::vector{random_tensor(r, {2, 3, 4, 4}), random_tensor(r, {5, 3, 1, 1}),
                              random_tensor(r, {5})};
         },
         [](Tape<double>& t, const std::vector<Var>& v) { return conv2d(t, v[0], v[1], v[2]); });
  simple("batchnorm2d",
         [](Rng& r) {
           return std::vector{random_tensor(r, {3, 2, 4, 4}, 2.0), random_tensor(r, {2}),
                              random_tensor(r, {2})};
         },
         [](Tape<double>& t, const std::vector<Var>& v) {
           BatchNormState<double> s = BatchNormState<double>::identity(2);
           return batchnorm2d(t, v[0], v[1], v[2], s);
         });
  simple("batchnorm2d_eval",
         [](Rng& r) {
           return std::vector{random_tensor(r, {2, 2, 4, 4}), random_tensor(r, {2}),
                              random_tensor(r, {2})};
         },
         [](Tape<double>& t, const std::vector<Var>& v) {
           BatchNormState<double> s = BatchNormState<double>::identity(2);
           s.running_mean[0] = 0.3;
           s.running_var[1] = 2.5;
           s.mode = BatchNormMode::kEval;
           return batchnorm2d(t, v[0], v[1], v[2], s);
         });
  simple("relu", [](Rng& r) { return std::vector{off_kink_tensor(r, {2, 3, 4, 4})}; },
         [](Tape<double>& t, const std::vector<Var>& v) { return relu(t, v[0]); });
  simple("maxpool2x2", [](Rng& r) { return std::vector{distinct_tensor(r, {2, 2, 6, 6})}; },
         [](Tape<double>& t, const std::vector<Var>& v) { return maxpool2x2(t, v[0]).output; });
  out.push_back({"unpool2x2", [&opt](Rng& rng, std::uint64_t seed, std::size_t& checks) {
                   Tape<double> pool_tape;
                   const PoolIndices idx =
                       maxpool2x2(pool_tape, pool_tape.leaf(random_tensor(rng, {2, 2, 6, 6})))
                           .indices;
                   const Fn fn = [&](Tape<double>& t, const std::vector<Var>& v) {
                     return project(t, unpool2x2(t, v[0], idx), seed);
                   };
                   return check_fn({random_tensor(rng, {2, 2, 3, 3})}, fn, rng, opt, checks);
                 }});
  simple("concat_channels",
         [](Rng& r) {
           return std::vector{random_tensor(r, {2, 2, 4, 4}), random_tensor(r, {2, 3, 4, 4})};
         },
         [](Tape<double>& t, const std::vector<Var>& v) { return concat_channels(t, v[0], v[1]); });
  simple("softmax_channels", [](Rng& r) { return std::vector{random_tensor(r, {2, 4, 3, 3}, 2.0)}; },
         [](Tape<double>& t, const std::vector<Var>& v) { return softmax_channels(t, v[0]); });

  for (const bool use_dice : {true, false}) {
    out.push_back({use_dice ? "composite_loss" : "composite_loss_no_dice",
                   [use_dice, &opt](Rng& rng, std::uint64_t, std::size_t& checks) {
                     const std::size_t b = 2, n = 3, h = 4, w = 4;
                     std::vector<Label> labels(b * h * w);
                     std::vector<double> weights(b * h * w);
                     for (auto& l : labels) l = static_cast<Label>(rng.uniform_int(0, n - 1));
                     for (auto& x : weights) x = rng.uniform(0.1, 6.0);
                     LossConfig cfg;
                     cfg.use_dice = use_dice;
                     const Fn fn = [&](Tape<double>& t, const std::vector<Var>& v) {
                       return composite_loss(t, softmax_channels(t, v[0]), labels, weights, cfg);
                     };
                     return check_fn({random_tensor(rng, {b, n, h, w})}, fn, rng, opt, checks);
                   }});
  }

  out.push_back({"sdnet_loss", [&opt](Rng& rng, std::uint64_t seed, std::size_t& checks) {
                   return check_network(rng, seed, opt, checks);
                 }});
  return out;
}

}  // namespace

bool GradCheckReport::passed() const { return failed_ops().empty() && !entries.empty(); }

std::vector<std::string> GradCheckReport::failed_ops() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!e.passed) out.push_back(e.op);
  }
  return out;
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (const Case& c : cases(options)) {
    GradCheckEntry e;
    e.op = c.op;
    for (std::uint64_t seed : options.seeds) {
      Rng rng(derive_seed(seed, "gradcheck:" + c.op));
      e.worst_error = std::max(e.worst_error, c.run(rng, seed, e.checks));
    }
    e.passed = std::isfinite(e.worst_error) && e.worst_error < options.tolerance;
    report.entries.push_back(e);
  }
  return report;
}

void print_gradcheck(std::ostream& out, const GradCheckReport& report) {
  char buf[160];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof(buf), "%-24s worst_rel_error=%.3e checks=%zu %s", e.op.c_str(),
                  e.worst_error, e.checks, e.passed ? "PASS" : "FAIL");
    out << buf << '\n';
  }
  if (report.passed()) {
    out << "gradcheck PASS tolerance=" << report.tolerance << '\n';
  } else {
    out << "gradcheck FAIL ops=";
    const auto failed = report.failed_ops();
    for (std::size_t i = 0; i < failed.size(); ++i) out << (i ? "," : "") << failed[i];
    out << '\n';
  }
}

}  // namespace sdnet
