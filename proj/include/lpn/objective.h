/* Copyright 2026 The LPN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef LPN_OBJECTIVE_H_
#define LPN_OBJECTIVE_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lpn/config.h"
#include "lpn/model.h"
#include "lpn/nn.h"

namespace lpn {

// -log softmax(logits)[label], label 1-based. Throws ConfigError when the
// label is outside [1, logits.size()].
template <typename T>
T PartLoss(std::span<const T> logits, int label);

// d PartLoss / d logits = softmax(logits) - onehot(label).
template <typename T>
void PartLossGradient(std::span<const T> logits, int label, std::span<T> grad);

// Mean over samples of the summed per-part losses (eval-mode forward).
// Throws ConfigError on an empty batch.
double BatchLoss(std::span<const GeoSample> samples, Model& model);

struct AugmentConfig {
  bool random_crop = true;        // reflect-pad 10 px, random crop back
  bool horizontal_flip = true;
  bool satellite_rotation = true;  // k*90 degrees plus +-10 degrees jitter
};

struct TrainConfig {
  int epochs = 120;
  double lr_backbone = 0.001;
  double lr_new = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 32;
  double lr_decay_factor = 0.1;
  int lr_decay_epoch = 80;
  AugmentConfig augment;

  void Validate() const;
  KeyValueConfig ToKeyValues() const;  // keys under "train."
  static TrainConfig FromKeyValues(const KeyValueConfig& kv);
  static const std::vector<std::string>& Keys();
};

struct LearningRates {
  double backbone;
  double new_layers;
};

// Step schedule; epochs are 1-based, so with the defaults epochs 1..80 use
// the base rates and 81.. the decayed ones.
LearningRates ScheduleAt(const TrainConfig& cfg, int epoch);

// SGD with momentum and L2 weight decay, one momentum buffer per parameter:
//   v = momentum * v + (grad + weight_decay * w);  w -= lr * v
class SgdOptimizer {
 public:
  SgdOptimizer(double momentum, double weight_decay)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void Step(std::span<nn::Parameter* const> params, const LearningRates& lr);

  // Momentum buffers keyed "optimizer.momentum.<param name>".
  void Export(std::vector<std::pair<std::string, Tensor>>& out) const;
  void Import(const Checkpoint& checkpoint);

 private:
  double momentum_, weight_decay_;
  std::map<std::string, Tensor> velocity_;
};

// Images of one platform with their 1-based labels.
struct PlatformImages {
  Platform platform;
  std::vector<Tensor> images;  // [3, H, W]
  std::vector<int> labels;
};

struct EpochLog {
  int epoch;
  std::string split = "train";
  double mean_loss;  // per image, summed over parts
  double lr_backbone;
  double lr_new;
};

// CSV with header `epoch,split,mean_loss,lr_backbone,lr_new`.
void WriteLossLog(std::ostream& os, std::span<const EpochLog> log, bool header = true);

// Applies the training-time augmentation for one image of `platform`.
Tensor AugmentImage(const Tensor& image, Platform platform, const AugmentConfig& cfg,
                    nn::Rng& rng);

// Drives the instance-loss optimization. Each epoch walks the images of the
// largest platform in shuffled order; every such anchor contributes one
// image per platform of its class, so each step trains all branches against
// the shared classifiers. The objective sums part and platform losses and
// averages over anchors.
class Trainer {
 public:
  Trainer(Model& model, TrainConfig config, std::uint64_t seed);

  using EpochCallback = std::function<void(const EpochLog&)>;
  // Runs epochs start_epoch+1 .. config.epochs. Throws NumericalError on a
  // non-finite loss and DataError on inconsistent label spaces.
  std::vector<EpochLog> Run(std::span<const PlatformImages> data, int start_epoch = 0,
                            const EpochCallback& on_epoch_end = {});

  SgdOptimizer& optimizer() { return optimizer_; }
  const TrainConfig& config() const { return config_; }

  // Weights plus momentum buffers; records the completed epoch count.
  Checkpoint MakeCheckpoint(int completed_epochs) const;
  // Restores model and optimizer state; returns the completed epoch count.
  int Resume(const Checkpoint& checkpoint);

 private:
  Model& model_;
  TrainConfig config_;
  SgdOptimizer optimizer_;
  nn::Rng rng_;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

// One-shot training from a fresh model.
TrainResult Train(std::span<const PlatformImages> data, const TrainConfig& train_config,
                  const ModelConfig& model_config, std::uint64_t seed);

}  // namespace lpn

#endif  // LPN_OBJECTIVE_H_
