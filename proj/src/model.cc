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
#include "lpn/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "binary_io.h"
#include "lpn/errors.h"

namespace lpn {
namespace {

using nn::ParamGroup;
using io::ReadU32;
using io::ReadU64;
using io::WriteU32;
using io::WriteU64;

constexpr int kTinyWidths[4] = {8, 16, 32, 64};
constexpr char kCheckpointMagic[8] = {'L', 'P', 'N', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

void BuildTiny(nn::Sequential& net, nn::Rng& rng) {
  int in = 3;
  for (int b = 0; b < 4; ++b) {
    auto& block = net.Emplace<nn::Sequential>("block" + std::to_string(b + 1));
    auto& conv =
        block.Emplace<nn::Conv2d>("conv", in, kTinyWidths[b], 3, 2, 1, false, ParamGroup::kBackbone);
    conv.KaimingInit(rng);
    if (b == 0) conv.set_input_grad(false);
    block.Emplace<nn::BatchNorm>("bn", kTinyWidths[b], ParamGroup::kBackbone);
    block.Emplace<nn::ReLU>("relu");
    in = kTinyWidths[b];
  }
}

// ResNet-50 with the stride of conv5_1 (3x3 conv and shortcut) set to 1.
void BuildReference50(nn::Sequential& net, nn::Rng& rng) {
  auto& conv1 = net.Emplace<nn::Conv2d>("conv1", 3, 64, 7, 2, 3, false, ParamGroup::kBackbone);
  conv1.KaimingInit(rng);
  conv1.set_input_grad(false);
  net.Emplace<nn::BatchNorm>("bn1", 64, ParamGroup::kBackbone);
  net.Emplace<nn::ReLU>("relu");
  net.Emplace<nn::MaxPool2d>("maxpool", 3, 2, 1);
  const int blocks[4] = {3, 4, 6, 3};
  const int widths[4] = {64, 128, 256, 512};
  const int strides[4] = {1, 2, 2, 1};
  int in = 64;
  for (int l = 0; l < 4; ++l) {
    auto& layer = net.Emplace<nn::Sequential>("layer" + std::to_string(l + 1));
    for (int b = 0; b < blocks[l]; ++b) {
      layer.Emplace<nn::Bottleneck>(std::to_string(b), in, widths[l], b == 0 ? strides[l] : 1,
                                    rng);
      in = widths[l] * 4;
    }
  }
}

}  // namespace

std::string_view PlatformName(Platform platform) {
  switch (platform) {
    case Platform::kSatellite: return "satellite";
    case Platform::kDrone: return "drone";
    case Platform::kGround: return "ground";
  }
  return "unknown";
}

Platform ParsePlatform(std::string_view name) {
  if (name == "satellite") return Platform::kSatellite;
  if (name == "drone") return Platform::kDrone;
  if (name == "ground" || name == "street") return Platform::kGround;
  throw ConfigError("unknown platform '" + std::string(name) + "'");
}

Platform PlatformFromIndex(int index) {
  if (index < 1 || index > 3) {
    throw ConfigError("platform index must be 1, 2 or 3, got " + std::to_string(index));
  }
  return static_cast<Platform>(index);
}

std::string_view BackboneName(BackboneKind kind) {
  return kind == BackboneKind::kTiny ? "tiny" : "reference50";
}

BackboneKind ParseBackbone(std::string_view name) {
  if (name == "tiny") return BackboneKind::kTiny;
  if (name == "reference50" || name == "resnet50") return BackboneKind::kReference50;
  throw ConfigError("unknown backbone '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::Validate() const {
  if (bottleneck_dim < 1) throw ConfigError("model.bottleneck_dim must be >= 1");
  if (num_classes < 1) throw ConfigError("model.num_classes must be >= 1");
  if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) {
    throw ConfigError("model.dropout_rate must lie in [0, 1)");
  }
  if (input_size < Backbone::kStride || input_size % Backbone::kStride != 0) {
    throw ConfigError("model.input_size must be a positive multiple of 16, got " +
                      std::to_string(input_size));
  }
  if (platforms.empty()) throw ConfigError("model.platforms must name at least one platform");
  if (aerial_partition.num_parts != ground_partition.num_parts) {
    throw ConfigError("aerial and ground partitions must use the same part count");
  }
  const int map = input_size / Backbone::kStride;
  aerial_partition.Validate(map, map);
  if (HasPlatform(Platform::kGround)) ground_partition.Validate(map, map);
}

const PartitionSpec& ModelConfig::PartitionFor(Platform platform) const {
  return platform == Platform::kGround ? ground_partition : aerial_partition;
}

bool ModelConfig::HasPlatform(Platform platform) const {
  return std::find(platforms.begin(), platforms.end(), platform) != platforms.end();
}

const std::vector<std::string>& ModelConfig::Keys() {
  static const std::vector<std::string> keys = {
      "model.backbone",      "model.aerial_partition", "model.ground_partition",
      "model.bottleneck_dim", "model.num_classes",     "model.dropout_rate",
      "model.share_aerial_weights", "model.input_size", "model.platforms"};
  return keys;
}

KeyValueConfig ModelConfig::ToKeyValues() const {
  KeyValueConfig kv;
  kv.Set("model.backbone", std::string(BackboneName(backbone)));
  kv.Set("model.aerial_partition", aerial_partition.ToString());
  kv.Set("model.ground_partition", ground_partition.ToString());
  kv.Set("model.bottleneck_dim", bottleneck_dim);
  kv.Set("model.num_classes", num_classes);
  kv.Set("model.dropout_rate", static_cast<double>(dropout_rate));
  kv.Set("model.share_aerial_weights", share_aerial_weights);
  kv.Set("model.input_size", input_size);
  std::string names;
  for (Platform p : platforms) {
    if (!names.empty()) names += ",";
    names += PlatformName(p);
  }
  kv.Set("model.platforms", names);
  return kv;
}

ModelConfig ModelConfig::FromKeyValues(const KeyValueConfig& kv) {
  ModelConfig cfg;
  cfg.backbone = ParseBackbone(kv.GetString("model.backbone", std::string(BackboneName(cfg.backbone))));
  if (kv.Has("model.aerial_partition")) {
    cfg.aerial_partition = PartitionSpec::Parse(kv.Require("model.aerial_partition"));
  }
  cfg.ground_partition = kv.Has("model.ground_partition")
                             ? PartitionSpec::Parse(kv.Require("model.ground_partition"))
                             : cfg.aerial_partition;
  cfg.bottleneck_dim = kv.GetInt("model.bottleneck_dim", cfg.bottleneck_dim);
  cfg.num_classes = kv.GetInt("model.num_classes", cfg.num_classes);
  cfg.dropout_rate = static_cast<float>(kv.GetDouble("model.dropout_rate", cfg.dropout_rate));
  cfg.share_aerial_weights = kv.GetBool("model.share_aerial_weights", cfg.share_aerial_weights);
  cfg.input_size = kv.GetInt("model.input_size", cfg.input_size);
  if (kv.Has("model.platforms")) {
    cfg.platforms.clear();
    for (const auto& name : SplitString(kv.Require("model.platforms"), ',')) {
      cfg.platforms.push_back(ParsePlatform(name));
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Backbone / ClassifierModule

Backbone::Backbone(BackboneKind kind, nn::Rng& rng) : channels_(Channels(kind)) {
  if (kind == BackboneKind::kTiny) {
    BuildTiny(net_, rng);
  } else {
    BuildReference50(net_, rng);
  }
}

int Backbone::Channels(BackboneKind kind) {
  return kind == BackboneKind::kTiny ? kTinyWidths[3] : 2048;
}

ClassifierModule::ClassifierModule(int in_features, int bottleneck_dim, int num_classes,
                                   float dropout_rate, nn::Rng& rng)
    : fc_(in_features, bottleneck_dim, ParamGroup::kNew),
      bn_(bottleneck_dim, ParamGroup::kNew),
      dropout_(dropout_rate),
      cls_(bottleneck_dim, num_classes, ParamGroup::kNew) {
  fc_.KaimingInitFanOut(rng);
  cls_.NormalInit(rng, 0.001f);
}

ClassifierModule::Output ClassifierModule::Forward(const Tensor& features,
                                                   const nn::Context& ctx) {
  Output out;
  out.bottleneck = bn_.Forward(fc_.Forward(features, ctx), ctx);
  out.logits = cls_.Forward(dropout_.Forward(out.bottleneck, ctx), ctx);
  return out;
}

Tensor ClassifierModule::Backward(const Tensor& grad_logits) {
  return fc_.Backward(bn_.Backward(dropout_.Backward(cls_.Backward(grad_logits))));
}

void ClassifierModule::CollectParameters(const std::string& prefix,
                                         std::vector<nn::Parameter*>& out) {
  fc_.CollectParameters(prefix + "fc.", out);
  bn_.CollectParameters(prefix + "bn.", out);
  cls_.CollectParameters(prefix + "cls.", out);
}

void ClassifierModule::CollectBuffers(const std::string& prefix, std::vector<nn::Buffer>& out) {
  bn_.CollectBuffers(prefix + "bn.", out);
}

// ---------------------------------------------------------------------------
// Checkpoint

const Tensor* Checkpoint::Find(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void Checkpoint::Save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint '" + path + "'");
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  WriteU32(os, kCheckpointVersion);
  const std::string text = meta.ToString();
  WriteU64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  WriteU32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    WriteU32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    WriteU32(os, static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.shape()) WriteU32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
  if (!os) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint Checkpoint::Load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw DataError("'" + path + "' is not an LPN checkpoint");
  }
  const std::uint32_t version = ReadU32(is);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint64_t text_size = ReadU64(is);
  std::string text(text_size, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(text_size))) {
    throw DataError("truncated checkpoint");
  }
  ckpt.meta = KeyValueConfig::ParseString(text);
  const std::uint32_t count = ReadU32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(ReadU32(is), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      throw DataError("truncated checkpoint");
    }
    std::vector<int> shape(ReadU32(is));
    for (int& d : shape) d = static_cast<int>(ReadU32(is));
    Tensor t(shape);
    if (!is.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(float)))) {
      throw DataError("truncated checkpoint tensor '" + name + "'");
    }
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.Validate();
  nn::Rng rng(seed);
  for (Platform p : {Platform::kSatellite, Platform::kDrone, Platform::kGround}) {
    if (!config_.HasPlatform(p)) continue;
    const bool aerial = p != Platform::kGround;
    const std::string name =
        aerial && config_.share_aerial_weights ? "aerial" : std::string(PlatformName(p));
    auto it = std::find_if(branches_.begin(), branches_.end(),
                           [&](const BranchSlot& b) { return b.name == name; });
    if (it == branches_.end()) {
      branches_.push_back({name, std::make_unique<Backbone>(config_.backbone, rng)});
      it = branches_.end() - 1;
    }
    branch_of_[p] = static_cast<int>(it - branches_.begin());
  }
  for (int i = 0; i < num_parts(); ++i) {
    classifiers_.push_back(std::make_unique<ClassifierModule>(
        feature_channels(), config_.bottleneck_dim, config_.num_classes, config_.dropout_rate,
        rng));
  }
}

std::string Model::BranchName(Platform platform) const {
  return branches_[BranchIndex(platform)].name;
}

int Model::BranchIndex(Platform platform) const {
  const auto it = branch_of_.find(platform);
  if (it == branch_of_.end()) {
    throw ConfigError("model has no branch for platform '" + std::string(PlatformName(platform)) +
                      "'");
  }
  return it->second;
}

PartAssignment Model::AssignmentFor(Platform platform, int height, int width) const {
  return BuildAssignment(config_.PartitionFor(platform), height, width);
}

void Model::CheckImages(const Tensor& images) const {
  if (images.ndim() != 4 || images.dim(1) != 3) {
    throw ConfigError("expected an image batch [N, 3, H, W], got " + images.ShapeString());
  }
  const int h = images.dim(2), w = images.dim(3);
  if (h < Backbone::kStride || w < Backbone::kStride || h % Backbone::kStride != 0 ||
      w % Backbone::kStride != 0) {
    throw ConfigError("image size " + std::to_string(h) + "x" + std::to_string(w) +
                      " is incompatible with the backbone (needs multiples of 16)");
  }
}

Tensor Model::ExtractFeatures(const Tensor& images, Platform platform, const nn::Context& ctx) {
  const int branch = BranchIndex(platform);
  CheckImages(images);
  return branches_[branch].backbone->Forward(images, ctx);
}

FeatureMap Model::ExtractFeatures(const GeoSample& sample) {
  if (sample.image.ndim() != 3) {
    throw ConfigError("sample image must be [3, H, W], got " + sample.image.ShapeString());
  }
  Tensor batch = sample.image;
  batch.Reshape({1, batch.dim(0), batch.dim(1), batch.dim(2)});
  const Tensor features = ExtractFeatures(batch, sample.platform, nn::Context{});
  return FeatureMap(features.dim(2), features.dim(3), features.dim(1), features.ToVector());
}

Model::PartOutput Model::ClassifyPart(const PartDescriptor& part, int part_index,
                                      Platform platform) {
  if (part_index < 1 || part_index > num_parts()) {
    throw ConfigError("part index " + std::to_string(part_index) + " outside [1, " +
                      std::to_string(num_parts()) + "]");
  }
  if (part.values.size() != static_cast<std::size_t>(feature_channels())) {
    throw ConfigError("part descriptor has " + std::to_string(part.values.size()) +
                      " channels, classifier expects " + std::to_string(feature_channels()));
  }
  const Tensor input({1, feature_channels()}, part.values);
  auto out = classifiers_[part_index - 1]->Forward(input, nn::Context{});
  PartOutput result;
  result.logits.values = out.logits.ToVector();
  result.logits.part_index = part_index;
  result.logits.platform = platform;
  result.bottleneck = out.bottleneck.ToVector();
  return result;
}

std::vector<float> Model::Embed(const GeoSample& sample) {
  Tensor batch = sample.image;
  if (batch.ndim() != 3) throw ConfigError("sample image must be [3, H, W]");
  batch.Reshape({1, batch.dim(0), batch.dim(1), batch.dim(2)});
  return EmbedBatch(batch, sample.platform).ToVector();
}

Tensor Model::EmbedBatch(const Tensor& images, Platform platform) {
  const nn::Context eval;
  const Tensor features = ExtractFeatures(images, platform, eval);
  const int n = features.dim(0), c = features.dim(1);
  const PartAssignment assignment = AssignmentFor(platform, features.dim(2), features.dim(3));
  const int parts = num_parts();
  std::vector<Tensor> pooled(parts, Tensor({n, c}));
  std::vector<float> buffer(static_cast<std::size_t>(parts) * c);
  for (int s = 0; s < n; ++s) {
    PoolParts<float>(features.slice(s), c, assignment, buffer);
    for (int i = 0; i < parts; ++i) {
      std::copy_n(buffer.begin() + static_cast<std::ptrdiff_t>(i) * c, c, pooled[i].slice(s).begin());
    }
  }
  const int dim = config_.bottleneck_dim;
  Tensor out({n, parts * dim});
  for (int i = 0; i < parts; ++i) {
    const Tensor bottleneck = classifiers_[i]->Forward(pooled[i], eval).bottleneck;
    for (int s = 0; s < n; ++s) {
      std::copy_n(bottleneck.slice(s).begin(), dim,
                  out.slice(s).begin() + static_cast<std::ptrdiff_t>(i) * dim);
    }
  }
  return out;
}

std::vector<Tensor> Model::Forward(std::span<const PlatformBatch> batches, const nn::Context& ctx) {
  pending_.clear();
  pending_batches_.clear();
  int total = 0;
  for (const auto& b : batches) {
    CheckImages(b.images);
    pending_batches_.push_back({b.platform, b.images.dim(0), total});
    total += b.images.dim(0);
  }
  pending_rows_ = total;
  const int parts = num_parts();
  const int c = feature_channels();
  std::vector<Tensor> pooled(parts, Tensor({total, c}));
  std::vector<float> buffer(static_cast<std::size_t>(parts) * c);

  for (std::size_t br = 0; br < branches_.size(); ++br) {
    PendingBranch pending{static_cast<int>(br), {}, {}};
    std::vector<const Tensor*> inputs;
    for (std::size_t k = 0; k < batches.size(); ++k) {
      if (BranchIndex(batches[k].platform) == static_cast<int>(br)) {
        pending.batch_ids.push_back(static_cast<int>(k));
        inputs.push_back(&batches[k].images);
      }
    }
    if (inputs.empty()) continue;
    const Tensor images = inputs.size() == 1 ? *inputs[0] : Concat0(inputs);
    const Tensor features = branches_[br].backbone->Forward(images, ctx);
    pending.shape = features.shape();
    int row = 0;
    for (int k : pending.batch_ids) {
      const auto& info = pending_batches_[k];
      const PartAssignment assignment =
          AssignmentFor(info.platform, features.dim(2), features.dim(3));
      for (int s = 0; s < info.rows; ++s, ++row) {
        PoolParts<float>(features.slice(row), c, assignment, buffer);
        for (int i = 0; i < parts; ++i) {
          std::copy_n(buffer.begin() + static_cast<std::ptrdiff_t>(i) * c, c,
                      pooled[i].slice(info.offset + s).begin());
        }
      }
    }
    pending_.push_back(std::move(pending));
  }

  std::vector<Tensor> logits;
  logits.reserve(parts);
  for (int i = 0; i < parts; ++i) logits.push_back(classifiers_[i]->Forward(pooled[i], ctx).logits);
  if (!ctx.training) pending_.clear();
  return logits;
}

void Model::Backward(std::span<const Tensor> grad_logits) {
  if (pending_.empty()) throw ConfigError("Model::Backward without a training Forward");
  const int parts = num_parts();
  if (grad_logits.size() != static_cast<std::size_t>(parts)) {
    throw ConfigError("Model::Backward expects one gradient per part");
  }
  const int c = feature_channels();
  std::vector<Tensor> grad_pooled;
  grad_pooled.reserve(parts);
  for (int i = 0; i < parts; ++i) grad_pooled.push_back(classifiers_[i]->Backward(grad_logits[i]));

  std::vector<float> upstream(static_cast<std::size_t>(parts) * c);
  for (const auto& pending : pending_) {
    Tensor grad_features(pending.shape);
    int row = 0;
    for (int k : pending.batch_ids) {
      const auto& info = pending_batches_[k];
      const PartAssignment assignment = AssignmentFor(info.platform, pending.shape[2], pending.shape[3]);
      for (int s = 0; s < info.rows; ++s, ++row) {
        for (int i = 0; i < parts; ++i) {
          const auto src = grad_pooled[i].slice(info.offset + s);
          std::copy(src.begin(), src.end(), upstream.begin() + static_cast<std::ptrdiff_t>(i) * c);
        }
        PoolPartsGradient<float>(upstream, c, assignment, grad_features.slice(row));
      }
    }
    branches_[pending.branch].backbone->Backward(grad_features);
  }
  pending_.clear();
}

std::vector<nn::Parameter*> Model::Parameters() {
  std::vector<nn::Parameter*> out;
  for (auto& b : branches_) b.backbone->CollectParameters("branch." + b.name + ".", out);
  for (std::size_t i = 0; i < classifiers_.size(); ++i) {
    classifiers_[i]->CollectParameters("classifier.part" + std::to_string(i + 1) + ".", out);
  }
  return out;
}

std::vector<nn::Buffer> Model::Buffers() {
  std::vector<nn::Buffer> out;
  for (auto& b : branches_) b.backbone->CollectBuffers("branch." + b.name + ".", out);
  for (std::size_t i = 0; i < classifiers_.size(); ++i) {
    classifiers_[i]->CollectBuffers("classifier.part" + std::to_string(i + 1) + ".", out);
  }
  return out;
}

nn::Parameter* Model::FindParameter(std::string_view name) {
  for (nn::Parameter* p : Parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

void Model::ZeroGrad() {
  for (nn::Parameter* p : Parameters()) p->grad.Fill(0.0f);
}

Checkpoint Model::ToCheckpoint() const {
  auto& self = const_cast<Model&>(*this);
  Checkpoint ckpt;
  ckpt.meta = config_.ToKeyValues();
  for (nn::Parameter* p : self.Parameters()) ckpt.tensors.emplace_back(p->name, p->value);
  for (const nn::Buffer& b : self.Buffers()) ckpt.tensors.emplace_back(b.name, *b.value);
  return ckpt;
}

void Model::LoadState(const Checkpoint& checkpoint) {
  auto restore = [&](const std::string& name, Tensor& dst) {
    const Tensor* src = checkpoint.Find(name);
    if (src == nullptr) throw DataError("checkpoint lacks tensor '" + name + "'");
    if (src->shape() != dst.shape()) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + src->ShapeString() +
                      ", model expects " + dst.ShapeString());
    }
    dst = *src;
  };
  for (nn::Parameter* p : Parameters()) restore(p->name, p->value);
  for (const nn::Buffer& b : Buffers()) restore(b.name, *b.value);
}

Model Model::FromCheckpoint(const Checkpoint& checkpoint) {
  Model model(ModelConfig::FromKeyValues(checkpoint.meta), 0);
  model.LoadState(checkpoint);
  return model;
}

}  // namespace lpn
