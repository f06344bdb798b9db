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

#include "sdnet/model.h"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "sdnet/rng.h"

namespace sdnet {

void ModelConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("model: num_classes must be >= 2");
  if (channels < 1) throw std::invalid_argument("model: channels must be >= 1");
  if (kernel_size % 2 == 0) throw std::invalid_argument("model: kernel_size must be odd");
  if (input_channels != 1) throw std::invalid_argument("model: only 1 input channel is supported");
}

namespace {

template <typename T, typename P, typename Out>
void collect(P& p, Out& out, bool include_running) {
  auto block = [&](const std::string& prefix, auto& b) {
    out.emplace_back(prefix + ".conv.weight", &b.weight);
    out.emplace_back(prefix + ".conv.bias", &b.bias);
    out.emplace_back(prefix + ".bn.weight", &b.bn.gamma);
    out.emplace_back(prefix + ".bn.bias", &b.bn.beta);
    if (include_running) {
      out.emplace_back(prefix + ".bn.running_mean", &b.bn.running_mean);
      out.emplace_back(prefix + ".bn.running_var", &b.bn.running_var);
    }
  };
  for (std::size_t i = 0; i < kNumBlocks; ++i) block("enc" + std::to_string(i + 1), p.encoders[i]);
  for (std::size_t i = 0; i < kNumBlocks; ++i) block("dec" + std::to_string(i + 1), p.decoders[i]);
  out.emplace_back("classifier.weight", &p.classifier_weight);
  out.emplace_back("classifier.bias", &p.classifier_bias);
}

// Expected shape of every named tensor for a config.
std::map<std::string, Shape> expected_shapes(const ModelConfig& c) {
  std::map<std::string, Shape> shapes;
  const std::size_t k = c.kernel_size, ch = c.channels;
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    const std::size_t enc_in = i == 0 ? c.input_channels : ch;
    for (const auto& [prefix, cin] : {std::pair{"enc" + std::to_string(i + 1), enc_in},
                                      std::pair{"dec" + std::to_string(i + 1), 2 * ch}}) {
      shapes[prefix + ".conv.weight"] = {ch, cin, k, k};
      for (const char* n : {".conv.bias", ".bn.weight", ".bn.bias", ".bn.running_mean",
                            ".bn.running_var"}) {
        shapes[prefix + n] = {ch};
      }
    }
  }
  shapes["classifier.weight"] = {static_cast<std::size_t>(c.num_classes), ch, 1, 1};
  shapes["classifier.bias"] = {static_cast<std::size_t>(c.num_classes)};
  return shapes;
}

SDNetParameters zero_parameters(const ModelConfig& config) {
  SDNetParameters p;
  p.config = config;
  const std::size_t ch = config.channels, k = config.kernel_size;
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    const std::size_t enc_in = i == 0 ? config.input_channels : ch;
    p.encoders[i] = {Tensor<float>({ch, enc_in, k, k}), Tensor<float>({ch}),
                     BatchNormState<float>::identity(ch)};
    p.decoders[i] = {Tensor<float>({ch, 2 * ch, k, k}), Tensor<float>({ch}),
                     BatchNormState<float>::identity(ch)};
  }
  const auto n = static_cast<std::size_t>(config.num_classes);
  p.classifier_weight = Tensor<float>({n, ch, 1, 1});
  p.classifier_bias = Tensor<float>({n});
  return p;
}

void he_uniform(Tensor<float>& kernel, Rng& rng) {
  const std::size_t fan_in = kernel.dim(1) * kernel.dim(2) * kernel.dim(3);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  float bound_f = static_cast<float>(bound);
  if (bound_f > bound) bound_f = std::nextafter(bound_f, 0.0f);
  for (float& v : kernel.values()) {
    v = std::clamp(static_cast<float>(rng.uniform(-bound, bound)), -bound_f, bound_f);
  }
}

}  // namespace

template <typename T>
typename BasicParameters<T>::Named BasicParameters<T>::named_tensors() {
  Named out;
  collect<T>(*this, out, true);
  return out;
}

template <typename T>
typename BasicParameters<T>::ConstNamed BasicParameters<T>::named_tensors() const {
  ConstNamed out;
  collect<T>(*this, out, true);
  return out;
}

template <typename T>
typename BasicParameters<T>::Named BasicParameters<T>::learnable() {
  Named out;
  collect<T>(*this, out, false);
  return out;
}

template <typename T>
void BasicParameters<T>::set_mode(BatchNormMode mode) {
  for (auto& b : encoders) b.bn.mode = mode;
  for (auto& b : decoders) b.bn.mode = mode;
}

template <typename T>
template <typename U>
BasicParameters<U> BasicParameters<T>::cast() const {
  BasicParameters<U> out;
  out.config = config;
  auto conv = [](const ConvBlock<T>& b) {
    return ConvBlock<U>{b.weight.template cast<U>(), b.bias.template cast<U>(),
                        b.bn.template cast<U>()};
  };
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    out.encoders[i] = conv(encoders[i]);
    out.decoders[i] = conv(decoders[i]);
  }
  out.classifier_weight = classifier_weight.template cast<U>();
  out.classifier_bias = classifier_bias.template cast<U>();
  return out;
}

bool bit_identical(const SDNetParameters& a, const SDNetParameters& b) {
  if (!(a.config == b.config)) return false;
  const auto na = a.named_tensors();
  const auto nb = b.named_tensors();
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (!bit_identical(*na[i].second, *nb[i].second)) return false;
  }
  return true;
}

SDNetParameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  SDNetParameters p = zero_parameters(config);
  Rng rng(seed);
  for (auto& b : p.encoders) he_uniform(b.weight, rng);
  for (auto& b : p.decoders) he_uniform(b.weight, rng);
  he_uniform(p.classifier_weight, rng);
  return p;
}

template <typename T>
ForwardPass<T> forward(Tape<T>& tape, BasicParameters<T>& params, const Tensor<T>& image,
                       BatchNormMode mode, bool requires_grad) {
  const ModelConfig& cfg = params.config;
  if (image.rank() != 4 || image.dim(1) != cfg.input_channels) {
    throw ShapeError("forward: image must be (B, 1, H, W), got " + shape_to_string(image.shape()));
  }
  const std::size_t m = ModelConfig::kSpatialMultiple;
  if (image.dim(0) == 0 || image.dim(2) == 0 || image.dim(3) == 0 || image.dim(2) % m != 0 ||
      image.dim(3) % m != 0) {
    throw ShapeError("forward: spatial extents of " + shape_to_string(image.shape()) +
                     " must be positive multiples of " + std::to_string(m));
  }
  params.set_mode(mode);

  ForwardPass<T> pass;
  auto leaves = [&](ConvBlock<T>& b) {
    std::array<Var, 4> v{tape.leaf(b.weight, requires_grad), tape.leaf(b.bias, requires_grad),
                         tape.leaf(b.bn.gamma, requires_grad), tape.leaf(b.bn.beta, requires_grad)};
    pass.learnable.insert(pass.learnable.end(), v.begin(), v.end());
    return v;
  };
  std::array<std::array<Var, 4>, kNumBlocks> enc, dec;
  for (std::size_t i = 0; i < kNumBlocks; ++i) enc[i] = leaves(params.encoders[i]);
  for (std::size_t i = 0; i < kNumBlocks; ++i) dec[i] = leaves(params.decoders[i]);
  const Var cls_w = tape.leaf(params.classifier_weight, requires_grad);
  const Var cls_b = tape.leaf(params.classifier_bias, requires_grad);
  pass.learnable.push_back(cls_w);
  pass.learnable.push_back(cls_b);

  auto block = [&](Var x, const std::array<Var, 4>& v, ConvBlock<T>& b) {
    x = conv2d(tape, x, v[0], v[1]);
    x = batchnorm2d(tape, x, v[2], v[3], b.bn);
    return relu(tape, x);
  };

  Var x = tape.leaf(image, false);
  std::array<Var, kNumBlocks> skips;
  for (std::size_t i = 0; i < kNumBlocks; ++i) {
    x = block(x, enc[i], params.encoders[i]);
    skips[i] = x;
    pass.trace.skips[i] = tape.value(x);
    PoolResult pooled = maxpool2x2(tape, x);
    x = pooled.output;
    pass.trace.indices[i] = std::move(pooled.indices);
  }
  for (std::size_t i = kNumBlocks; i-- > 0;) {
    x = unpool2x2(tape, x, pass.trace.indices[i]);
    pass.trace.unpooled[i] = tape.value(x);
    x = concat_channels(tape, x, skips[i]);
    x = block(x, dec[i], params.decoders[i]);
  }
  x = conv2d(tape, x, cls_w, cls_b);
  pass.probs = softmax_channels(tape, x);
  return pass;
}

Tensor<float> predict_probabilities(const SDNetParameters& params, const Tensor<float>& image) {
  SDNetParameters copy = params;
  Tape<float> tape;
  const ForwardPass<float> pass = forward(tape, copy, image, BatchNormMode::kEval, false);
  return tape.value(pass.probs);
}

template <typename T>
std::vector<LabelSlice> predict_labels(const Tensor<T>& probs) {
  if (probs.rank() != 4) {
    throw ShapeError("predict_labels: expected (B,N,H,W), got " + shape_to_string(probs.shape()));
  }
  const std::size_t batch = probs.dim(0), n = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
  std::vector<LabelSlice> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    LabelSlice s(h, w);
    for (std::size_t i = 0; i < h * w; ++i) {
      std::size_t best = 0;
      T best_p = probs[(b * n) * h * w + i];
      for (std::size_t l = 1; l < n; ++l) {
        const T v = probs[(b * n + l) * h * w + i];
        if (v > best_p) {
          best_p = v;
          best = l;
        }
      }
      s.labels[i] = static_cast<Label>(best);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_checkpoint(std::ostream& out, const SDNetParameters& params) {
  const auto named = params.named_tensors();
  out.write("SDCK", 4);
  le::put_u32(out, kCheckpointVersion);
  le::put_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    le::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_sdt1(out, *tensor);
  }
}

SDNetParameters read_checkpoint(std::istream& in) {
  using Kind = CheckpointError::Kind;
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != "SDCK") {
    throw CheckpointError(Kind::kBadMagic, "bad checkpoint magic: expected 'SDCK'");
  }
  std::map<std::string, Tensor<float>> found;
  try {
    const std::uint32_t version = le::get_u32(in, "checkpoint version");
    if (version != kCheckpointVersion) {
      throw CheckpointError(Kind::kBadVersion, "unsupported checkpoint version " +
                                                   std::to_string(version) + ", expected " +
                                                   std::to_string(kCheckpointVersion));
    }
    const std::uint32_t count = le::get_u32(in, "checkpoint tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint16_t len = le::get_u16(in, "tensor name length");
      std::string name(len, '\0');
      in.read(name.data(), len);
      if (in.gcount() != len) throw FormatError("truncated input while reading tensor name");
      found[name] = read_sdt1(in);
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const FormatError& e) {
    throw CheckpointError(Kind::kTruncated, std::string("corrupt checkpoint: ") + e.what());
  }

  auto dim_of = [&](const std::string& name, std::size_t d) -> std::size_t {
    auto it = found.find(name);
    if (it == found.end()) throw CheckpointError(Kind::kMissingTensor, "checkpoint lacks " + name);
    if (it->second.rank() <= d) throw CheckpointError(Kind::kShape, name + " has wrong rank");
    return it->second.dim(d);
  };
  ModelConfig config;
  config.channels = dim_of("enc1.conv.weight", 0);
  config.kernel_size = dim_of("enc1.conv.weight", 2);
  config.num_classes = static_cast<int>(dim_of("classifier.weight", 0));

  const auto shapes = expected_shapes(config);
  for (const auto& [name, tensor] : found) {
    auto it = shapes.find(name);
    if (it == shapes.end()) {
      throw CheckpointError(Kind::kUnknownTensor, "unknown tensor '" + name + "' in checkpoint");
    }
    if (it->second != tensor.shape()) {
      throw CheckpointError(Kind::kShape, name + " has shape " + shape_to_string(tensor.shape()) +
                                              ", expected " + shape_to_string(it->second));
    }
  }
  SDNetParameters p = zero_parameters(config);
  for (auto& [name, tensor] : p.named_tensors()) {
    auto it = found.find(name);
    if (it == found.end()) throw CheckpointError(Kind::kMissingTensor, "checkpoint lacks " + name);
    *tensor = std::move(it->second);
  }
  return p;
}

void save_checkpoint(const SDNetParameters& params, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& out) { write_checkpoint(out, params); });
}

SDNetParameters load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

template struct BasicParameters<float>;
template struct BasicParameters<double>;
template BasicParameters<double> BasicParameters<float>::cast<double>() const;
template BasicParameters<float> BasicParameters<double>::cast<float>() const;
template BasicParameters<float> BasicParameters<float>::cast<float>() const;
template ForwardPass<float> forward(Tape<float>&, BasicParameters<float>&, const Tensor<float>&,
                                    BatchNormMode, bool);
template ForwardPass<double> forward(Tape<double>&, BasicParameters<double>&,
                                     const Tensor<double>&, BatchNormMode, bool);
template std::vector<LabelSlice> predict_labels(const Tensor<float>&);
template std::vector<LabelSlice> predict_labels(const Tensor<double>&);

}  // namespace sdnet
