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

#ifndef SDNET_TRAINER_H_
#define SDNET_TRAINER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sdnet/data.h"
#include "sdnet/losses.h"
#include "sdnet/model.h"

namespace sdnet {

struct TrainConfig {
  double initial_lr = 0.1;
  double lr_decay_factor = 0.1;
  int lr_step = 20;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  int batch_size = 10;
  int max_epochs = 60;
  int patience = 10;  // epochs without a validation mean-Dice improvement
  std::uint64_t seed = 1;
  bool use_dice = true;
  double omega0 = 5.0;
  double dice_epsilon = 1e-6;
  double ecb_q = 0.05;
  // Keeps the boundary term on top of the ECB class weights.
  bool ecb_boundary = false;
  bool augment = true;
  AugmentationConfig augmentation;

  void validate() const;
  // initial_lr * decay^floor((epoch - 1) / lr_step), epochs counted from 1.
  double lr_at(int epoch) const;
  LossConfig loss_config() const;
};

enum class FineTuneMode { kNormal, kEcb };

FineTuneMode parse_finetune_mode(const std::string& s);
std::string to_string(FineTuneMode mode);

struct EpochLog {
  int epoch = 0;
  std::string phase;
  double loss = 0;       // mean training loss over the epoch's batches
  double mean_dice = 0;  // validation, foreground classes
  double lr = 0;
  int steps = 0;
  std::vector<double> accuracy;       // validation Dice per class (a^t)
  std::vector<double> class_weights;  // logistic class weights used this epoch
};

struct TrainResult {
  SDNetParameters best;  // parameters of the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

struct Validation {
  AccuracyVector accuracy;
  double mean_dice = 0;
};

// Eval-mode segmentation of every validation slice; per-class Dice pooled over
// all validation pixels (1 for classes absent from prediction and truth).
Validation validate(const SDNetParameters& params, std::span<const Sample> val);

using EpochCallback = std::function<void(const EpochLog&)>;

// Training from init_parameters on auxiliary labels with median-frequency +
// boundary weights.
TrainResult pretrain(const TrainConfig& config, const ModelConfig& model,
                     std::span<const Sample> aux_train, std::span<const Sample> aux_val,
                     const EpochCallback& on_epoch = nullptr);

// Fine-tuning on manual labels. Epoch 1 uses median-frequency + boundary
// weights; in ECB mode each later epoch uses ecb_weights of the previous
// epoch's validation accuracies.
TrainResult finetune(const TrainConfig& config, const SDNetParameters& pretrained,
                     std::span<const Sample> train, std::span<const Sample> val, FineTuneMode mode,
                     const EpochCallback& on_epoch = nullptr);

// Baseline: the same recipe as normal fine-tuning, from a random init.
TrainResult train_from_scratch(const TrainConfig& config, const ModelConfig& model,
                               std::span<const Sample> train, std::span<const Sample> val,
                               const EpochCallback& on_epoch = nullptr);

// Class weights for epoch t+1 given the validation accuracies of epoch t.
std::vector<double> next_class_weights(FineTuneMode mode, const std::vector<double>& current,
                                       const AccuracyVector& accuracy, double q);

// Throws ShapeError when the checkpoint's class count differs from the data's.
void check_num_classes(const SDNetParameters& params, int num_classes);

// Header: epoch,phase,loss,mean_dice,lr,a_0..a_{N-1},w_0..w_{N-1}
void write_epoch_log_csv(std::ostream& out, std::span<const EpochLog> log, int num_classes);

}  // namespace sdnet

#endif  // SDNET_TRAINER_H_
