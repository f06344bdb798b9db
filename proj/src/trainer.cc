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

#include "sdnet/trainer.h"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "sdnet/metrics.h"
#include "sdnet/optim.h"
#include "sdnet/rng.h"

namespace sdnet {

namespace {

constexpr std::size_t kEvalBatch = 10;

enum class WeightPolicy { kMedianFrequency, kEcb };

struct RunSpec {
  std::string phase;
  WeightPolicy policy = WeightPolicy::kMedianFrequency;
};

Tensor<float> stack_images(std::span<const Sample* const> batch) {
  const std::size_t h = batch[0]->labels.height, w = batch[0]->labels.width;
  Tensor<float> images({batch.size(), 1, h, w});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b]->image.shape() != Shape{h, w}) {
      throw ShapeError("training batch mixes slice extents");
    }
    std::copy_n(batch[b]->image.data(), h * w, images.data() + b * h * w);
  }
  return images;
}

void check_samples(std::span<const Sample> samples, int num_classes, const char* what) {
  if (samples.empty()) throw std::invalid_argument(std::string(what) + " set is empty");
  for (const Sample& s : samples) {
    for (Label l : s.labels.labels) {
      if (l < 0 || l >= num_classes) {
        throw std::invalid_argument(std::string(what) + " label " + std::to_string(l) +
                                    " outside the model's " + std::to_string(num_classes) +
                                    " classes");
      }
    }
  }
}

TrainResult run(const TrainConfig& cfg, SDNetParameters params, std::span<const Sample> train,
                std::span<const Sample> val, const RunSpec& spec, const EpochCallback& on_epoch) {
  cfg.validate();
  const int num_classes = params.config.num_classes;
  check_samples(train, num_classes, "training");
  check_samples(val, num_classes, "validation");

  std::vector<LabelSlice> train_labels;
  train_labels.reserve(train.size());
  for (const Sample& s : train) train_labels.push_back(s.labels);
  const ClassFrequencies freq = class_frequencies(train_labels, num_classes);
  const std::vector<double> mfb = mfb_class_weights(freq);
  const FineTuneMode mode =
      spec.policy == WeightPolicy::kEcb ? FineTuneMode::kEcb : FineTuneMode::kNormal;
  const LossConfig loss_cfg = cfg.loss_config();

  std::vector<double> class_w = mfb;
  bool mfb_epoch = true;  // epoch uses median-frequency + boundary weights
  SgdState sgd;
  TrainResult result;
  result.best = params;
  double best_dice = -1;
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    const SgdOptions opt{lr, cfg.momentum, cfg.weight_decay};
    Rng order_rng(derive_seed(cfg.seed, "batch-order", static_cast<std::uint64_t>(epoch)));
    const std::vector<std::size_t> order = order_rng.permutation(train.size());

    double loss_sum = 0;
    int steps = 0;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<Sample> augmented;
      augmented.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train[order[k]];
        augmented.push_back(cfg.augment ? augment(s, cfg.augmentation,
                                                  derive_seed(cfg.seed, "augment",
                                                              static_cast<std::uint64_t>(epoch),
                                                              order[k]))
                                        : s);
      }
      std::vector<const Sample*> ptrs;
      std::vector<Label> labels;
      std::vector<double> weights;
      for (const Sample& s : augmented) {
        ptrs.push_back(&s);
        labels.insert(labels.end(), s.labels.labels.begin(), s.labels.labels.end());
        const WeightMap wm =
            mfb_epoch ? mfb_weights(s.labels, freq, cfg.omega0)
                      : broadcast_class_weights(s.labels, class_w,
                                                cfg.ecb_boundary ? cfg.omega0 : 0.0);
        weights.insert(weights.end(), wm.weights.begin(), wm.weights.end());
      }
      const Tensor<float> images = stack_images(ptrs);

      Tape<float> tape;
      const ForwardPass<float> pass = forward(tape, params, images, BatchNormMode::kTrain);
      const Var loss = composite_loss(tape, pass.probs, labels, weights, loss_cfg);
      const float loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value)) {
        throw NumericError(spec.phase + ": non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(start / bs) + " (samples " +
                           std::to_string(order[start]) + "..)");
      }
      tape.backward(loss);

      auto named = params.learnable();
      std::vector<Tensor<float>*> ps;
      std::vector<const Tensor<float>*> gs;
      for (std::size_t i = 0; i < named.size(); ++i) {
        ps.push_back(named[i].second);
        gs.push_back(&tape.grad(pass.learnable[i]));
      }
      try {
        sgd_step(ps, gs, sgd, opt);
      } catch (const NumericError& e) {
        throw NumericError(spec.phase + ": epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / bs) + ": " + e.what());
      }
      loss_sum += loss_value;
      ++steps;
    }

    const Validation v = validate(params, val);
    EpochLog log;
    log.epoch = epoch;
    log.phase = spec.phase;
    log.loss = steps ? loss_sum / steps : 0;
    log.mean_dice = v.mean_dice;
    log.lr = lr;
    log.steps = steps;
    log.accuracy = v.accuracy.a;
    log.class_weights = class_w;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);

    if (v.mean_dice > best_dice) {
      best_dice = v.mean_dice;
      result.best = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }

    if (mode == FineTuneMode::kEcb) {
      AccuracyVector a = v.accuracy;
      a.epoch = epoch;
      class_w = next_class_weights(mode, class_w, a, cfg.ecb_q);
      mfb_epoch = false;
    }
  }
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(initial_lr > 0) || !(lr_decay_factor > 0) || lr_step < 1) {
    throw std::invalid_argument("train: learning-rate settings must be positive");
  }
  if (!(weight_decay >= 0) || !(momentum >= 0 && momentum < 1)) {
    throw std::invalid_argument("train: need weight_decay >= 0 and momentum in [0, 1)");
  }
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (max_epochs < 1 || patience < 1) throw std::invalid_argument("train: epochs must be >= 1");
  loss_config().validate();
  augmentation.validate();
}

double TrainConfig::lr_at(int epoch) const {
  return initial_lr * std::pow(lr_decay_factor, (epoch - 1) / lr_step);
}

LossConfig TrainConfig::loss_config() const {
  LossConfig c;
  c.omega0 = omega0;
  c.use_dice = use_dice;
  c.dice_epsilon = dice_epsilon;
  c.q = ecb_q;
  c.reduction = LogisticReduction::kMean;
  return c;
}

FineTuneMode parse_finetune_mode(const std::string& s) {
  if (s == "normal") return FineTuneMode::kNormal;
  if (s == "ecb") return FineTuneMode::kEcb;
  throw std::invalid_argument("invalid fine-tuning mode '" + s + "' (expected normal|ecb)");
}

std::string to_string(FineTuneMode mode) { return mode == FineTuneMode::kEcb ? "ecb" : "normal"; }

Validation validate(const SDNetParameters& params, std::span<const Sample> val) {
  if (val.empty()) throw std::invalid_argument("validate: empty validation set");
  const int n = params.config.num_classes;
  ConfusionCounts counts(n);
  for (std::size_t start = 0; start < val.size(); start += kEvalBatch) {
    const std::size_t end = std::min(val.size(), start + kEvalBatch);
    std::vector<const Sample*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&val[i]);
    const Tensor<float> images = stack_images(ptrs);
    const std::vector<LabelSlice> pred = predict_labels(predict_probabilities(params, images));
    for (std::size_t i = 0; i < pred.size(); ++i) counts.add(pred[i].labels, ptrs[i]->labels.labels);
  }
  Validation v;
  v.accuracy.a = counts.dice();
  v.mean_dice = foreground_mean(v.accuracy.a);
  return v;
}

std::vector<double> next_class_weights(FineTuneMode mode, const std::vector<double>& current,
                                       const AccuracyVector& accuracy, double q) {
  if (mode == FineTuneMode::kNormal) return current;
  return ecb_weights(accuracy, q);
}

void check_num_classes(const SDNetParameters& params, int num_classes) {
  if (params.config.num_classes != num_classes) {
    throw ShapeError("checkpoint predicts " + std::to_string(params.config.num_classes) +
                     " classes but the dataset has " + std::to_string(num_classes));
  }
}

TrainResult pretrain(const TrainConfig& config, const ModelConfig& model,
                     std::span<const Sample> aux_train, std::span<const Sample> aux_val,
                     const EpochCallback& on_epoch) {
  return run(config, init_parameters(model, derive_seed(config.seed, "init")), aux_train, aux_val,
             {"pretrain", WeightPolicy::kMedianFrequency}, on_epoch);
}

TrainResult finetune(const TrainConfig& config, const SDNetParameters& pretrained,
                     std::span<const Sample> train, std::span<const Sample> val, FineTuneMode mode,
                     const EpochCallback& on_epoch) {
  check_num_classes(pretrained, pretrained.config.num_classes);
  for (const Sample& s : train) {
    for (Label l : s.labels.labels) {
      if (l >= pretrained.config.num_classes) {
        throw ShapeError("checkpoint predicts " + std::to_string(pretrained.config.num_classes) +
                         " classes but training labels reach " + std::to_string(l));
      }
    }
  }
  const RunSpec spec = mode == FineTuneMode::kEcb
                           ? RunSpec{"finetune_ecb", WeightPolicy::kEcb}
                           : RunSpec{"finetune_normal", WeightPolicy::kMedianFrequency};
  return run(config, pretrained, train, val, spec, on_epoch);
}

TrainResult train_from_scratch(const TrainConfig& config, const ModelConfig& model,
                               std::span<const Sample> train, std::span<const Sample> val,
                               const EpochCallback& on_epoch) {
  return run(config, init_parameters(model, derive_seed(config.seed, "init")), train, val,
             {"scratch", WeightPolicy::kMedianFrequency}, on_epoch);
}

void write_epoch_log_csv(std::ostream& out, std::span<const EpochLog> log, int num_classes) {
  out << "epoch,phase,loss,mean_dice,lr";
  for (int l = 0; l < num_classes; ++l) out << ",a_" << l;
  for (int l = 0; l < num_classes; ++l) out << ",w_" << l;
  out << '\n';
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const EpochLog& e : log) {
    out << e.epoch << ',' << e.phase << ',' << num(e.loss) << ',' << num(e.mean_dice) << ','
        << num(e.lr);
    for (int l = 0; l < num_classes; ++l) {
      out << ',' << num(static_cast<std::size_t>(l) < e.accuracy.size() ? e.accuracy[l] : 0);
    }
    for (int l = 0; l < num_classes; ++l) {
      out << ','
          << num(static_cast<std::size_t>(l) < e.class_weights.size() ? e.class_weights[l] : 0);
    }
    out << '\n';
  }
}

}  // namespace sdnet
