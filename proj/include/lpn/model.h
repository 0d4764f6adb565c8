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
#ifndef LPN_MODEL_H_
#define LPN_MODEL_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lpn/config.h"
#include "lpn/nn.h"
#include "lpn/partition.h"
#include "lpn/tensor.h"

namespace lpn {

enum class Platform { kSatellite = 1, kDrone = 2, kGround = 3 };

std::string_view PlatformName(Platform platform);
Platform ParsePlatform(std::string_view name);
// 1 = satellite, 2 = drone, 3 = ground. Throws ConfigError otherwise.
Platform PlatformFromIndex(int index);

enum class BackboneKind { kReference50, kTiny };

std::string_view BackboneName(BackboneKind kind);
BackboneKind ParseBackbone(std::string_view name);

struct GeoSample {
  Tensor image;  // [3, H, W], values in [0, 1]
  Platform platform = Platform::kSatellite;
  int label = 1;  // 1-based class id
};

struct ModelConfig {
  BackboneKind backbone = BackboneKind::kReference50;
  // Partition for the satellite and drone branches.
  PartitionSpec aerial_partition{PartitionStrategy::kSquareRing, 4};
  // Partition for the ground branch (row bands for north-aligned panoramas).
  PartitionSpec ground_partition{PartitionStrategy::kSquareRing, 4};
  int bottleneck_dim = 512;
  int num_classes = 0;
  float dropout_rate = 0.5f;
  bool share_aerial_weights = true;
  int input_size = 256;
  // Branches to instantiate; only the platforms present in the data.
  std::vector<Platform> platforms{Platform::kSatellite, Platform::kDrone};

  void Validate() const;
  int num_parts() const { return aerial_partition.num_parts; }
  const PartitionSpec& PartitionFor(Platform platform) const;
  bool HasPlatform(Platform platform) const;

  // Keys under "model.".
  KeyValueConfig ToKeyValues() const;
  static ModelConfig FromKeyValues(const KeyValueConfig& kv);
  static const std::vector<std::string>& Keys();
};

// Feature extractor of one branch. Output stride is 16 for both kinds.
class Backbone {
 public:
  Backbone(BackboneKind kind, nn::Rng& rng);

  Tensor Forward(const Tensor& images, const nn::Context& ctx) { return net_.Forward(images, ctx); }
  void Backward(const Tensor& grad) { net_.Backward(grad); }
  void CollectParameters(const std::string& prefix, std::vector<nn::Parameter*>& out) {
    net_.CollectParameters(prefix, out);
  }
  void CollectBuffers(const std::string& prefix, std::vector<nn::Buffer>& out) {
    net_.CollectBuffers(prefix, out);
  }

  int channels() const { return channels_; }
  static int Channels(BackboneKind kind);
  static constexpr int kStride = 16;

 private:
  nn::Sequential net_;
  int channels_;
};

// FC -> BN -> Dropout -> Cls for one part index.
class ClassifierModule {
 public:
  ClassifierModule(int in_features, int bottleneck_dim, int num_classes, float dropout_rate,
                   nn::Rng& rng);

  struct Output {
    Tensor logits;      // [N, num_classes]
    Tensor bottleneck;  // [N, bottleneck_dim], post-BN
  };
  Output Forward(const Tensor& features, const nn::Context& ctx);
  Tensor Backward(const Tensor& grad_logits);

  void CollectParameters(const std::string& prefix, std::vector<nn::Parameter*>& out);
  void CollectBuffers(const std::string& prefix, std::vector<nn::Buffer>& out);

 private:
  nn::Linear fc_;
  nn::BatchNorm bn_;
  nn::Dropout dropout_;
  nn::Linear cls_;
};

struct PartLogits {
  std::vector<float> values;
  int part_index = 1;
  Platform platform = Platform::kSatellite;
};

// Named tensors plus structured text; the on-disk checkpoint format.
struct Checkpoint {
  KeyValueConfig meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* Find(std::string_view name) const;
  void Save(const std::string& path) const;
  static Checkpoint Load(const std::string& path);
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  int num_parts() const { return config_.num_parts(); }
  int feature_channels() const { return Backbone::Channels(config_.backbone); }
  int descriptor_dim() const { return num_parts() * config_.bottleneck_dim; }
  // "aerial" when satellite/drone share weights, otherwise the platform name.
  std::string BranchName(Platform platform) const;

  // Eval-mode forward of one image.
  FeatureMap ExtractFeatures(const GeoSample& sample);
  Tensor ExtractFeatures(const Tensor& images, Platform platform, const nn::Context& ctx);

  struct PartOutput {
    PartLogits logits;
    std::vector<float> bottleneck;
  };
  // Eval-mode classifier call on a pooled part feature.
  PartOutput ClassifyPart(const PartDescriptor& part, int part_index,
                          Platform platform = Platform::kSatellite);

  // Concatenated post-BN bottlenecks, part order 1..n.
  std::vector<float> Embed(const GeoSample& sample);
  // [N, n * bottleneck_dim] for a [N, 3, H, W] batch.
  Tensor EmbedBatch(const Tensor& images, Platform platform);

  struct PlatformBatch {
    Platform platform;
    Tensor images;  // [N_k, 3, H, W]
  };
  // Per-part logits, rows ordered as the concatenation of `batches`. In
  // training mode the activations are kept for Backward.
  std::vector<Tensor> Forward(std::span<const PlatformBatch> batches, const nn::Context& ctx);
  // Accumulates gradients for the last training Forward.
  void Backward(std::span<const Tensor> grad_logits);

  std::vector<nn::Parameter*> Parameters();
  std::vector<nn::Buffer> Buffers();
  nn::Parameter* FindParameter(std::string_view name);
  void ZeroGrad();

  Checkpoint ToCheckpoint() const;
  // Restores parameters and buffers. Throws DataError on missing or
  // mis-shaped tensors.
  static Model FromCheckpoint(const Checkpoint& checkpoint);
  void LoadState(const Checkpoint& checkpoint);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

 private:
  struct BranchSlot {
    std::string name;
    std::unique_ptr<Backbone> backbone;
  };
  struct PendingBranch {
    int branch;
    std::vector<int> batch_ids;
    std::vector<int> shape;  // feature map shape
  };
  struct PendingBatch {
    Platform platform;
    int rows;
    int offset;  // first row in the concatenated logits
  };

  int BranchIndex(Platform platform) const;
  PartAssignment AssignmentFor(Platform platform, int height, int width) const;
  void CheckImages(const Tensor& images) const;

  ModelConfig config_;
  std::vector<BranchSlot> branches_;
  std::map<Platform, int> branch_of_;
  std::vector<std::unique_ptr<ClassifierModule>> classifiers_;

  // Training forward state.
  std::vector<PendingBranch> pending_;
  std::vector<PendingBatch> pending_batches_;
  int pending_rows_ = 0;
};

}  // namespace lpn

#endif  // LPN_MODEL_H_
