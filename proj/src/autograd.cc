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

#include "sdnet/autograd.h"

#include <atomic>
#include <cmath>

#include "gemm.h"

namespace sdnet {

namespace {

std::atomic<bool> g_negate_conv_backward{false};

void require_rank4(const Shape& s, const char* op, const char* what) {
  if (s.size() != 4) {
    throw ShapeError(std::string(op) + ": " + what + " must be 4-D, got " + shape_to_string(s));
  }
}

// Unfolds one (C, H, W) image into a (C*k*k, H*W) patch matrix.
template <typename T>
void im2col(const T* src, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            T* cols) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = src + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = cols + ((c * k + ky) * k + kx) * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          T* out = row + y * W;
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= H || x0 >= x1) {
            std::fill(out, out + W, T(0));
            continue;
          }
          std::fill(out, out + x0, T(0));
          const T* in = plane + sy * W + dx;
          for (std::ptrdiff_t x = x0; x < x1; ++x) out[x] = in[x];
          std::fill(out + x1, out + W, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates patch-matrix gradients into the image.
template <typename T>
void col2im(const T* cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            T* dst) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = dst + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = cols + ((c * k + ky) * k + kx) * h * w;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          const T* in = row + y * W;
          T* out = plane + sy * W + dx;
          for (std::ptrdiff_t x = x0; x < x1; ++x) out[x] += in[x];
        }
      }
    }
  }
}

}  // namespace

namespace debug {
void set_negate_conv_backward(bool enabled) { g_negate_conv_backward = enabled; }
bool negate_conv_backward() { return g_negate_conv_backward; }
}  // namespace debug

template <typename T>
BatchNormState<T> BatchNormState<T>::identity(std::size_t channels) {
  BatchNormState<T> s;
  s.gamma = Tensor<T>({channels}, T(1));
  s.beta = Tensor<T>({channels}, T(0));
  s.running_mean = Tensor<T>({channels}, T(0));
  s.running_var = Tensor<T>({channels}, T(1));
  return s;
}

template <typename T>
Var Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  return record(std::move(value), requires_grad, nullptr);
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T>& Tape<T>::grad(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.shape() != node.value.shape() || node.grad.numel() != node.value.numel()) {
    node.grad = Tensor<T>(node.value.shape(), T(0));
  }
  return node.grad;
}

template <typename T>
void Tape<T>::backward(Var root) {
  if (value(root).numel() != 1) {
    throw ShapeError("backward: root must be a scalar, got " + shape_to_string(value(root).shape()));
  }
  if (!requires_grad(root)) return;
  grad(root)[0] = T(1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.numel() != node.value.numel() || node.value.empty()) continue;
    node.backward(*this, Var{i});
  }
}

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var kernel, Var bias) {
  const Tensor<T>& x = tape.value(input);
  const Tensor<T>& w = tape.value(kernel);
  const Tensor<T>& b = tape.value(bias);
  require_rank4(x.shape(), "conv2d", "input");
  require_rank4(w.shape(), "conv2d", "kernel");
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(w.dim(1)) +
                     " input channels, input has " + std::to_string(cin));
  }
  if (w.dim(3) != k || k % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd extent, got " +
                     shape_to_string(w.shape()));
  }
  if (b.numel() != cout) {
    throw ShapeError("conv2d: bias has " + std::to_string(b.numel()) + " elements, expected " +
                     std::to_string(cout));
  }

  const std::size_t hw = h * wd, patch = cin * k * k;
  Tensor<T> out({batch, cout, h, wd});
  std::vector<T> cols(k == 1 ? 0 : patch * hw);
  for (std::size_t n = 0; n < batch; ++n) {
    const T* src = x.data() + n * cin * hw;
    if (k != 1) {
      im2col(src, cin, h, wd, k, cols.data());
      src = cols.data();
    }
    T* dst = out.data() + n * cout * hw;
    internal::gemm(false, false, static_cast<int>(cout), static_cast<int>(hw),
                   static_cast<int>(patch), T(1), w.data(), static_cast<int>(patch), src,
                   static_cast<int>(hw), T(0), dst, static_cast<int>(hw));
    for (std::size_t co = 0; co < cout; ++co) {
      const T bc = b[co];
      for (std::size_t i = 0; i < hw; ++i) dst[co * hw + i] += bc;
    }
  }

  const bool req = tape.requires_grad(input) || tape.requires_grad(kernel) || tape.requires_grad(bias);
  return tape.record(std::move(out), req, [=](Tape<T>& t, Var self) {
    const Tensor<T>& gout = t.grad(self);
    const Tensor<T>& xv = t.value(input);
    const Tensor<T>& wv = t.value(kernel);
    const T sign = debug::negate_conv_backward() ? T(-1) : T(1);
    std::vector<T> cols_b(k == 1 ? 0 : patch * hw);
    std::vector<T> dcols(t.requires_grad(input) && k != 1 ? patch * hw : 0);
    for (std::size_t n = 0; n < batch; ++n) {
      const T* g = gout.data() + n * cout * hw;
      if (t.requires_grad(bias)) {
        Tensor<T>& gb = t.grad(bias);
        for (std::size_t co = 0; co < cout; ++co) {
          T s = 0;
          for (std::size_t i = 0; i < hw; ++i) s += g[co * hw + i];
          gb[co] += sign * s;
        }
      }
      if (t.requires_grad(kernel)) {
        const T* src = xv.data() + n * cin * hw;
        if (k != 1) {
          im2col(src, cin, h, wd, k, cols_b.data());
          src = cols_b.data();
        }
        internal::gemm(false, true, static_cast<int>(cout), static_cast<int>(patch),
                       static_cast<int>(hw), sign, g, static_cast<int>(hw), src,
                       static_cast<int>(hw), T(1), t.grad(kernel).data(), static_cast<int>(patch));
      }
      if (t.requires_grad(input)) {
        T* gx = t.grad(input).data() + n * cin * hw;
        if (k == 1) {
          internal::gemm(true, false, static_cast<int>(cin), static_cast<int>(hw),
                         static_cast<int>(cout), sign, wv.data(), static_cast<int>(patch), g,
                         static_cast<int>(hw), T(1), gx, static_cast<int>(hw));
        } else {
          internal::gemm(true, false, static_cast<int>(patch), static_cast<int>(hw),
                         static_cast<int>(cout), sign, wv.data(), static_cast<int>(patch), g,
                         static_cast<int>(hw), T(0), dcols.data(), static_cast<int>(hw));
          col2im(dcols.data(), cin, h, wd, k, gx);
        }
      }
    }
  });
}

template <typename T>
Var batchnorm2d(Tape<T>& tape, Var input, Var gamma, Var beta, BatchNormState<T>& state) {
  const Tensor<T>& x = tape.value(input);
  require_rank4(x.shape(), "batchnorm2d", "input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  const std::size_t count = batch * hw;
  if (tape.value(gamma).numel() != channels || tape.value(beta).numel() != channels ||
      state.running_mean.numel() != channels || state.running_var.numel() != channels) {
    throw ShapeError("batchnorm2d: parameter size does not match " + std::to_string(channels) +
                     " channels");
  }
  if (!(state.epsilon > 0)) throw std::invalid_argument("batchnorm2d: epsilon must be positive");
  const bool train = state.mode == BatchNormMode::kTrain;
  if (train && count < 2) {
    throw ShapeError("batchnorm2d: train mode needs at least 2 values per channel, got " +
                     std::to_string(count));
  }

  std::vector<T> mean(channels), inv_std(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    if (train) {
      double s = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data() + (n * channels + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double ss = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data() + (n * channels + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) ss += (p[i] - m) * (p[i] - m);
      }
      const double var = ss / static_cast<double>(count);
      mean[c] = static_cast<T>(m);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + state.epsilon));
      const double unbiased = ss / static_cast<double>(count - 1);
      state.running_mean[c] = static_cast<T>((1 - state.momentum) * state.running_mean[c] +
                                             state.momentum * m);
      state.running_var[c] = static_cast<T>((1 - state.momentum) * state.running_var[c] +
                                            state.momentum * unbiased);
    } else {
      mean[c] = state.running_mean[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.running_var[c]) +
                                                  state.epsilon));
    }
  }

  const Tensor<T>& g = tape.value(gamma);
  const Tensor<T>& bt = tape.value(beta);
  Tensor<T> xhat(x.shape());
  Tensor<T> out(x.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (n * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const T v = (x[off + i] - mean[c]) * inv_std[c];
        xhat[off + i] = v;
        out[off + i] = g[c] * v + bt[c];
      }
    }
  }

  const bool req = tape.requires_grad(input) || tape.requires_grad(gamma) || tape.requires_grad(beta);
  return tape.record(std::move(out), req, [=, xhat = std::move(xhat),
                                           inv_std = std::move(inv_std)](Tape<T>& t, Var self) {
    const Tensor<T>& gout = t.grad(self);
    const Tensor<T>& gv = t.value(gamma);
    for (std::size_t c = 0; c < channels; ++c) {
      double sum_g = 0, sum_gx = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const std::size_t off = (n * channels + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_g += gout[off + i];
          sum_gx += gout[off + i] * xhat[off + i];
        }
      }
      if (t.requires_grad(gamma)) t.grad(gamma)[c] += static_cast<T>(sum_gx);
      if (t.requires_grad(beta)) t.grad(beta)[c] += static_cast<T>(sum_g);
      if (!t.requires_grad(input)) continue;
      Tensor<T>& gx = t.grad(input);
      const T scale = gv[c] * inv_std[c];
      if (train) {
        const T mean_g = static_cast<T>(sum_g / static_cast<double>(count));
        const T mean_gx = static_cast<T>(sum_gx / static_cast<double>(count));
        for (std::size_t n = 0; n < batch; ++n) {
          const std::size_t off = (n * channels + c) * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            gx[off + i] += scale * (gout[off + i] - mean_g - xhat[off + i] * mean_gx);
          }
        }
      } else {
        for (std::size_t n = 0; n < batch; ++n) {
          const std::size_t off = (n * channels + c) * hw;
          for (std::size_t i = 0; i < hw; ++i) gx[off + i] += scale * gout[off + i];
        }
      }
    }
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var input) {
  const Tensor<T>& x = tape.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return tape.record(std::move(out), tape.requires_grad(input), [input](Tape<T>& t, Var self) {
    const Tensor<T>& gout = t.grad(self);
    const Tensor<T>& xv = t.value(input);
    Tensor<T>& gx = t.grad(input);
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      if (xv[i] > T(0)) gx[i] += gout[i];
    }
  });
}

template <typename T>
PoolResult maxpool2x2(Tape<T>& tape, Var input) {
  const Tensor<T>& x = tape.value(input);
  require_rank4(x.shape(), "maxpool2x2", "input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2x2: spatial extents must be even, got " + shape_to_string(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor<T> out({batch, channels, oh, ow});
  PoolIndices idx{out.shape(), std::vector<std::uint8_t>(out.numel())};
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          std::uint8_t best_pos = 0;
          T best = x.at(n, c, 2 * i, 2 * j);
          for (std::uint8_t p = 1; p < 4; ++p) {
            const T v = x.at(n, c, 2 * i + p / 2, 2 * j + p % 2);
            if (v > best) {
              best = v;
              best_pos = p;
            }
          }
          out.at(n, c, i, j) = best;
          idx.window_pos[((n * channels + c) * oh + i) * ow + j] = best_pos;
        }
      }
    }
  }
  Var v = tape.record(std::move(out), tape.requires_grad(input),
                      [input, pos = idx.window_pos](Tape<T>& t, Var self) {
                        const Tensor<T>& gout = t.grad(self);
                        Tensor<T>& gx = t.grad(input);
                        const std::size_t bc = gout.dim(0) * gout.dim(1);
                        const std::size_t oh = gout.dim(2), ow = gout.dim(3);
                        for (std::size_t p = 0; p < bc; ++p) {
                          for (std::size_t i = 0; i < oh; ++i) {
                            for (std::size_t j = 0; j < ow; ++j) {
                              const std::size_t o = (p * oh + i) * ow + j;
                              const std::size_t y = 2 * i + pos[o] / 2, x = 2 * j + pos[o] % 2;
                              gx[(p * 2 * oh + y) * 2 * ow + x] += gout[o];
                            }
                          }
                        }
                      });
  return PoolResult{v, std::move(idx)};
}

template <typename T>
Var unpool2x2(Tape<T>& tape, Var input, const PoolIndices& indices) {
  const Tensor<T>& x = tape.value(input);
  require_rank4(x.shape(), "unpool2x2", "input");
  if (indices.shape != x.shape() || indices.window_pos.size() != x.numel()) {
    throw ShapeError("unpool2x2: indices shape " + shape_to_string(indices.shape) +
                     " does not match input " + shape_to_string(x.shape()));
  }
  const std::size_t bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> out({x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (std::size_t p = 0; p < bc; ++p) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t o = (p * h + i) * w + j;
        const std::uint8_t pos = indices.window_pos[o];
        if (pos > 3) throw ShapeError("unpool2x2: window position out of range");
        out[(p * 2 * h + 2 * i + pos / 2) * 2 * w + 2 * j + pos % 2] = x[o];
      }
    }
  }
  return tape.record(std::move(out), tape.requires_grad(input),
                     [input, pos = indices.window_pos, bc, h, w](Tape<T>& t, Var self) {
                       const Tensor<T>& gout = t.grad(self);
                       Tensor<T>& gx = t.grad(input);
                       for (std::size_t p = 0; p < bc; ++p) {
                         for (std::size_t i = 0; i < h; ++i) {
                           for (std::size_t j = 0; j < w; ++j) {
                             const std::size_t o = (p * h + i) * w + j;
                             gx[o] += gout[(p * 2 * h + 2 * i + pos[o] / 2) * 2 * w + 2 * j +
                                           pos[o] % 2];
                           }
                         }
                       }
                     });
}

template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& x = tape.value(a);
  const Tensor<T>& y = tape.value(b);
  require_rank4(x.shape(), "concat_channels", "first operand");
  require_rank4(y.shape(), "concat_channels", "second operand");
  if (x.dim(0) != y.dim(0) || x.dim(2) != y.dim(2) || x.dim(3) != y.dim(3)) {
    throw ShapeError("concat_channels: cannot concatenate " + shape_to_string(x.shape()) +
                     " with " + shape_to_string(y.shape()));
  }
  const std::size_t batch = x.dim(0), ca = x.dim(1), cb = y.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out({batch, ca + cb, x.dim(2), x.dim(3)});
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(x.data() + n * ca * hw, ca * hw, out.data() + n * (ca + cb) * hw);
    std::copy_n(y.data() + n * cb * hw, cb * hw, out.data() + (n * (ca + cb) + ca) * hw);
  }
  const bool req = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(out), req, [=](Tape<T>& t, Var self) {
    const Tensor<T>& gout = t.grad(self);
    for (std::size_t n = 0; n < batch; ++n) {
      const T* g = gout.data() + n * (ca + cb) * hw;
      if (t.requires_grad(a) && ca > 0) {
        T* ga = t.grad(a).data() + n * ca * hw;
        for (std::size_t i = 0; i < ca * hw; ++i) ga[i] += g[i];
      }
      if (t.requires_grad(b) && cb > 0) {
        T* gb = t.grad(b).data() + n * cb * hw;
        for (std::size_t i = 0; i < cb * hw; ++i) gb[i] += g[ca * hw + i];
      }
    }
  });
}

template <typename T>
Var softmax_channels(Tape<T>& tape, Var logits) {
  const Tensor<T>& z = tape.value(logits);
  require_rank4(z.shape(), "softmax_channels", "logits");
  const std::size_t batch = z.dim(0), channels = z.dim(1), hw = z.dim(2) * z.dim(3);
  Tensor<T> out(z.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    const T* zp = z.data() + n * channels * hw;
    T* op = out.data() + n * channels * hw;
    for (std::size_t i = 0; i < hw; ++i) {
      T mx = zp[i];
      for (std::size_t c = 1; c < channels; ++c) mx = std::max(mx, zp[c * hw + i]);
      T sum = 0;
      for (std::size_t c = 0; c < channels; ++c) {
        const T e = std::exp(zp[c * hw + i] - mx);
        op[c * hw + i] = e;
        sum += e;
      }
      for (std::size_t c = 0; c < channels; ++c) op[c * hw + i] /= sum;
    }
  }
  return tape.record(std::move(out), tape.requires_grad(logits),
                     [=](Tape<T>& t, Var self) {
                       const Tensor<T>& gout = t.grad(self);
                       const Tensor<T>& p = t.value(self);
                       Tensor<T>& gz = t.grad(logits);
                       for (std::size_t n = 0; n < batch; ++n) {
                         const std::size_t base = n * channels * hw;
                         for (std::size_t i = 0; i < hw; ++i) {
                           T dot = 0;
                           for (std::size_t c = 0; c < channels; ++c) {
                             dot += gout[base + c * hw + i] * p[base + c * hw + i];
                           }
                           for (std::size_t c = 0; c < channels; ++c) {
                             const std::size_t o = base + c * hw + i;
                             gz[o] += p[o] * (gout[o] - dot);
                           }
                         }
                       }
                     });
}

template <typename T>
Var weighted_sum(Tape<T>& tape, Var input, const Tensor<T>& weights) {
  const Tensor<T>& x = tape.value(input);
  if (x.shape() != weights.shape()) {
    throw ShapeError("weighted_sum: weights " + shape_to_string(weights.shape()) +
                     " do not match input " + shape_to_string(x.shape()));
  }
  double s = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) s += static_cast<double>(x[i]) * weights[i];
  Tensor<T> out(Shape{}, static_cast<T>(s));
  return tape.record(std::move(out), tape.requires_grad(input),
                     [input, weights](Tape<T>& t, Var self) {
                       const T g = t.grad(self)[0];
                       Tensor<T>& gx = t.grad(input);
                       for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g * weights[i];
                     });
}

#define SDNET_INSTANTIATE(T)                                                            \
  template class Tape<T>;                                                               \
  template struct BatchNormState<T>;                                                    \
  template Var conv2d(Tape<T>&, Var, Var, Var);                                         \
  template Var batchnorm2d(Tape<T>&, Var, Var, Var, BatchNormState<T>&);                \
  template Var relu(Tape<T>&, Var);                                                     \
  template PoolResult maxpool2x2(Tape<T>&, Var);                                        \
  template Var unpool2x2(Tape<T>&, Var, const PoolIndices&);                            \
  template Var concat_channels(Tape<T>&, Var, Var);                                     \
  template Var softmax_channels(Tape<T>&, Var);                                         \
  template Var weighted_sum(Tape<T>&, Var, const Tensor<T>&);

SDNET_INSTANTIATE(float)
SDNET_INSTANTIATE(double)

#undef SDNET_INSTANTIATE

}  // namespace sdnet
