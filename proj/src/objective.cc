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
#include "lpn/objective.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "lpn/errors.h"
#include "lpn/image_ops.h"
#include "lpn/seed.h"

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace lpn {
namespace {

constexpr int kCropPadding = 10;
constexpr double kRotationJitter = 10.0;

void CheckLabel(int label, std::size_t num_classes) {
  if (label < 1 || static_cast<std::size_t>(label) > num_classes) {
    throw ConfigError("label " + std::to_string(label) + " outside [1, " +
                      std::to_string(num_classes) + "]");
  }
}

template <typename T>
T LogSumExp(std::span<const T> x) {
  const T m = *std::max_element(x.begin(), x.end());
  T sum = 0;
  for (T v : x) sum += std::exp(v - m);
  return m + std::log(sum);
}

// Large activations are freed and reallocated every step; keep them on the
// heap instead of round-tripping through mmap.
void TuneAllocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace

template <typename T>
T PartLoss(std::span<const T> logits, int label) {
  CheckLabel(label, logits.size());
  return LogSumExp(logits) - logits[label - 1];
}

template <typename T>
void PartLossGradient(std::span<const T> logits, int label, std::span<T> grad) {
  CheckLabel(label, logits.size());
  if (grad.size() != logits.size()) throw ConfigError("gradient buffer size mismatch");
  const T lse = LogSumExp(logits);
  for (std::size_t k = 0; k < logits.size(); ++k) grad[k] = std::exp(logits[k] - lse);
  grad[label - 1] -= T(1);
}

template float PartLoss<float>(std::span<const float>, int);
template double PartLoss<double>(std::span<const double>, int);
template void PartLossGradient<float>(std::span<const float>, int, std::span<float>);
template void PartLossGradient<double>(std::span<const double>, int, std::span<double>);

double BatchLoss(std::span<const GeoSample> samples, Model& model) {
  if (samples.empty()) throw ConfigError("BatchLoss: empty batch");
  std::vector<Platform> order;
  std::map<Platform, std::vector<const GeoSample*>> groups;
  for (const auto& s : samples) {
    if (!groups.count(s.platform)) order.push_back(s.platform);
    groups[s.platform].push_back(&s);
  }
  std::vector<Model::PlatformBatch> batches;
  std::vector<int> labels;
  for (Platform p : order) {
    std::vector<Tensor> images;
    for (const GeoSample* s : groups[p]) {
      images.push_back(s->image);
      labels.push_back(s->label);
    }
    batches.push_back({p, Stack(images)});
  }
  const auto logits = model.Forward(batches, nn::Context{});
  const int classes = model.config().num_classes;
  double total = 0.0;
  for (const Tensor& part : logits) {
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const auto row = part.slice(static_cast<int>(r));
      std::vector<double> z(row.begin(), row.end());
      CheckLabel(labels[r], static_cast<std::size_t>(classes));
      total += PartLoss<double>(z, labels[r]);
    }
  }
  return total / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::Validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (!(lr_backbone > 0 && lr_new > 0)) throw ConfigError("learning rates must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr_decay_factor > 0)) throw ConfigError("train.lr_decay_factor must be positive");
  if (lr_decay_epoch < 1) throw ConfigError("train.lr_decay_epoch must be >= 1");
  if (epochs > 0 && lr_decay_epoch >= epochs) {
    throw ConfigError("train.lr_decay_epoch (" + std::to_string(lr_decay_epoch) +
                      ") must be smaller than train.epochs (" + std::to_string(epochs) + ")");
  }
}

const std::vector<std::string>& TrainConfig::Keys() {
  static const std::vector<std::string> keys = {
      "train.epochs",          "train.lr_backbone",     "train.lr_new",
      "train.momentum",        "train.weight_decay",    "train.batch_size",
      "train.lr_decay_factor", "train.lr_decay_epoch",  "train.augment.random_crop",
      "train.augment.horizontal_flip", "train.augment.satellite_rotation"};
  return keys;
}

KeyValueConfig TrainConfig::ToKeyValues() const {
  KeyValueConfig kv;
  kv.Set("train.epochs", epochs);
  kv.Set("train.lr_backbone", lr_backbone);
  kv.Set("train.lr_new", lr_new);
  kv.Set("train.momentum", momentum);
  kv.Set("train.weight_decay", weight_decay);
  kv.Set("train.batch_size", batch_size);
  kv.Set("train.lr_decay_factor", lr_decay_factor);
  kv.Set("train.lr_decay_epoch", lr_decay_epoch);
  kv.Set("train.augment.random_crop", augment.random_crop);
  kv.Set("train.augment.horizontal_flip", augment.horizontal_flip);
  kv.Set("train.augment.satellite_rotation", augment.satellite_rotation);
  return kv;
}

TrainConfig TrainConfig::FromKeyValues(const KeyValueConfig& kv) {
  TrainConfig c;
  c.epochs = kv.GetInt("train.epochs", c.epochs);
  c.lr_backbone = kv.GetDouble("train.lr_backbone", c.lr_backbone);
  c.lr_new = kv.GetDouble("train.lr_new", c.lr_new);
  c.momentum = kv.GetDouble("train.momentum", c.momentum);
  c.weight_decay = kv.GetDouble("train.weight_decay", c.weight_decay);
  c.batch_size = kv.GetInt("train.batch_size", c.batch_size);
  c.lr_decay_factor = kv.GetDouble("train.lr_decay_factor", c.lr_decay_factor);
  c.lr_decay_epoch = kv.GetInt("train.lr_decay_epoch", c.lr_decay_epoch);
  c.augment.random_crop = kv.GetBool("train.augment.random_crop", c.augment.random_crop);
  c.augment.horizontal_flip = kv.GetBool("train.augment.horizontal_flip", c.augment.horizontal_flip);
  c.augment.satellite_rotation =
      kv.GetBool("train.augment.satellite_rotation", c.augment.satellite_rotation);
  return c;
}

LearningRates ScheduleAt(const TrainConfig& cfg, int epoch) {
  if (epoch < 1) throw ConfigError("epochs are 1-based");
  const double factor = std::pow(cfg.lr_decay_factor, (epoch - 1) / cfg.lr_decay_epoch);
  return {cfg.lr_backbone * factor, cfg.lr_new * factor};
}

// ---------------------------------------------------------------------------
// SgdOptimizer

void SgdOptimizer::Step(std::span<nn::Parameter* const> params, const LearningRates& lr) {
  const float mu = static_cast<float>(momentum_);
  const float wd = static_cast<float>(weight_decay_);
  for (nn::Parameter* p : params) {
    const float rate = static_cast<float>(
        p->group == nn::ParamGroup::kBackbone ? lr.backbone : lr.new_layers);
    auto [it, inserted] = velocity_.try_emplace(p->name, p->value.shape());
    Tensor& v = it->second;
    if (v.size() != p->value.size()) throw ConfigError("momentum buffer shape mismatch for " + p->name);
    float* w = p->value.data();
    const float* g = p->grad.data();
    float* vel = v.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      vel[i] = mu * vel[i] + g[i] + wd * w[i];
      w[i] -= rate * vel[i];
    }
  }
}

void SgdOptimizer::Export(std::vector<std::pair<std::string, Tensor>>& out) const {
  for (const auto& [name, v] : velocity_) out.emplace_back("optimizer.momentum." + name, v);
}

void SgdOptimizer::Import(const Checkpoint& checkpoint) {
  static const std::string prefix = "optimizer.momentum.";
  velocity_.clear();
  for (const auto& [name, t] : checkpoint.tensors) {
    if (name.rfind(prefix, 0) == 0) velocity_[name.substr(prefix.size())] = t;
  }
}

// ---------------------------------------------------------------------------

void WriteLossLog(std::ostream& os, std::span<const EpochLog> log, bool header) {
  if (header) os << "epoch,split,mean_loss,lr_backbone,lr_new\n";
  const auto precision = os.precision(10);
  for (const auto& e : log) {
    os << e.epoch << ',' << e.split << ',' << e.mean_loss << ',' << e.lr_backbone << ','
       << e.lr_new << '\n';
  }
  os.precision(precision);
}

Tensor AugmentImage(const Tensor& image, Platform platform, const AugmentConfig& cfg,
                    nn::Rng& rng) {
  Tensor out = image;
  if (cfg.satellite_rotation && platform == Platform::kSatellite) {
    const int quarter = std::uniform_int_distribution<int>(0, 3)(rng);
    const double jitter = std::uniform_real_distribution<double>(-kRotationJitter, kRotationJitter)(rng);
    out = RotateImage(out, 90.0 * quarter + jitter);
  }
  if (cfg.random_crop) {
    std::uniform_int_distribution<int> offset(0, 2 * kCropPadding);
    const int top = offset(rng);
    const int left = offset(rng);
    out = PadCrop(out, kCropPadding, top, left);
  }
  if (cfg.horizontal_flip && std::bernoulli_distribution(0.5)(rng)) out = FlipHorizontal(out);
  return out;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(Model& model, TrainConfig config, std::uint64_t seed)
    : model_(model),
      config_(std::move(config)),
      optimizer_(config_.momentum, config_.weight_decay),
      rng_(seed) {
  config_.Validate();
}

Checkpoint Trainer::MakeCheckpoint(int completed_epochs) const {
  Checkpoint ckpt = model_.ToCheckpoint();
  ckpt.meta.Merge(config_.ToKeyValues());
  ckpt.meta.Set("train.completed_epochs", completed_epochs);
  optimizer_.Export(ckpt.tensors);
  return ckpt;
}

int Trainer::Resume(const Checkpoint& checkpoint) {
  model_.LoadState(checkpoint);
  optimizer_.Import(checkpoint);
  return checkpoint.meta.GetInt("train.completed_epochs", 0);
}

std::vector<EpochLog> Trainer::Run(std::span<const PlatformImages> data, int start_epoch,
                                   const EpochCallback& on_epoch_end) {
  std::vector<EpochLog> log;
  if (start_epoch >= config_.epochs) return log;
  if (data.empty()) throw DataError("no training data");
  TuneAllocator();

  const int classes = model_.config().num_classes;
  // by_class[k][c - 1] = indices of class c in data[k]
  std::vector<std::vector<std::vector<int>>> by_class(data.size(),
                                                      std::vector<std::vector<int>>(classes));
  std::set<int> reference;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& d = data[k];
    if (!model_.config().HasPlatform(d.platform)) {
      throw DataError("training data for platform '" + std::string(PlatformName(d.platform)) +
                      "' but the model has no such branch");
    }
    if (d.images.size() != d.labels.size()) throw DataError("images/labels size mismatch");
    std::set<int> present;
    for (std::size_t i = 0; i < d.labels.size(); ++i) {
      const int label = d.labels[i];
      if (label < 1 || label > classes) {
        throw DataError("label " + std::to_string(label) + " on platform '" +
                        std::string(PlatformName(d.platform)) + "' outside [1, " +
                        std::to_string(classes) + "]");
      }
      by_class[k][label - 1].push_back(static_cast<int>(i));
      present.insert(label);
    }
    if (k == 0) {
      reference = present;
    } else if (present != reference) {
      throw DataError("label spaces differ between platforms '" +
                      std::string(PlatformName(data[0].platform)) + "' and '" +
                      std::string(PlatformName(d.platform)) + "'");
    }
  }
  std::size_t anchor = 0;
  for (std::size_t k = 1; k < data.size(); ++k) {
    if (data[k].images.size() > data[anchor].images.size()) anchor = k;
  }

  const std::uint64_t seed = rng_();
  auto params = model_.Parameters();
  const int parts = model_.num_parts();

  for (int epoch = start_epoch + 1; epoch <= config_.epochs; ++epoch) {
    nn::Rng rng(DeriveSeed(seed, kTrainStream, static_cast<std::uint64_t>(epoch)));
    const LearningRates lr = ScheduleAt(config_, epoch);
    std::vector<int> order(data[anchor].images.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    std::size_t epoch_images = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      const int anchors = static_cast<int>(end - start);
      // Batch-norm statistics need more than one anchor.
      if (anchors < 2 && order.size() >= 2) continue;

      std::vector<Model::PlatformBatch> batches;
      std::vector<int> labels;
      for (std::size_t k = 0; k < data.size(); ++k) {
        std::vector<Tensor> images;
        images.reserve(anchors);
        for (std::size_t a = start; a < end; ++a) {
          const int label = data[anchor].labels[order[a]];
          int index = order[a];
          if (k != anchor) {
            const auto& pool = by_class[k][label - 1];
            index = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
          }
          images.push_back(AugmentImage(data[k].images[index], data[k].platform, config_.augment, rng));
          labels.push_back(label);
        }
        batches.push_back({data[k].platform, Stack(images)});
      }

      model_.ZeroGrad();
      const nn::Context ctx{true, &rng};
      const auto logits = model_.Forward(batches, ctx);
      std::vector<Tensor> grads;
      grads.reserve(parts);
      double loss = 0.0;
      const float scale = 1.0f / static_cast<float>(anchors);
      for (const Tensor& part : logits) {
        Tensor grad(part.shape());
        for (std::size_t r = 0; r < labels.size(); ++r) {
          const auto row = part.slice(static_cast<int>(r));
          loss += PartLoss<float>(row, labels[r]);
          auto g = grad.slice(static_cast<int>(r));
          PartLossGradient<float>(row, labels[r], g);
          for (float& v : g) v *= scale;
        }
        grads.push_back(std::move(grad));
      }
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + " (anchors " +
                             std::to_string(start) + ".." + std::to_string(end - 1) + ")");
      }
      model_.Backward(grads);
      optimizer_.Step(params, lr);
      epoch_loss += loss;
      epoch_images += labels.size();
    }
    EpochLog entry{epoch, "train",
                   epoch_images ? epoch_loss / static_cast<double>(epoch_images) : 0.0,
                   lr.backbone, lr.new_layers};
    log.push_back(entry);
    if (on_epoch_end) on_epoch_end(entry);
  }
  return log;
}

TrainResult Train(std::span<const PlatformImages> data, const TrainConfig& train_config,
                  const ModelConfig& model_config, std::uint64_t seed) {
  Model model(model_config, DeriveSeed(seed, kInitStream));
  Trainer trainer(model, train_config, DeriveSeed(seed, kTrainStream));
  TrainResult result;
  result.log = trainer.Run(data);
  result.checkpoint = trainer.MakeCheckpoint(static_cast<int>(result.log.size()));
  return result;
}

}  // namespace lpn
