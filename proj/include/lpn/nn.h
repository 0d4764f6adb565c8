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
#ifndef LPN_NN_H_
#define LPN_NN_H_

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lpn/tensor.h"

namespace lpn::nn {

using Rng = std::mt19937_64;

// Backbone parameters get the small learning rate, freshly added layers the
// large one.
enum class ParamGroup { kBackbone, kNew };

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  ParamGroup group = ParamGroup::kBackbone;
};

// Non-trainable state that still belongs in checkpoints (BN running stats).
struct Buffer {
  std::string name;
  Tensor* value;
};

struct Context {
  bool training = false;
  Rng* rng = nullptr;  // required by Dropout in training mode
};

class Layer {
 public:
  virtual ~Layer() = default;

  // In training mode the layer caches what Backward needs; only one
  // forward/backward pair may be in flight per layer.
  virtual Tensor Forward(const Tensor& x, const Context& ctx) = 0;
  // Accumulates parameter gradients and returns d(loss)/d(input).
  virtual Tensor Backward(const Tensor& grad_out) = 0;

  virtual void CollectParameters(const std::string& /*prefix*/, std::vector<Parameter*>& /*out*/) {}
  virtual void CollectBuffers(const std::string& /*prefix*/, std::vector<Buffer>& /*out*/) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding,
         bool bias, ParamGroup group);

  Tensor Forward(const Tensor& x, const Context& ctx) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) override;

  // Skips the input gradient (first layer of a network).
  void set_input_grad(bool enabled) { input_grad_ = enabled; }
  void KaimingInit(Rng& rng);

  Parameter& weight() { return weight_; }
  int OutputSize(int input) const { return (input + 2 * padding_ - kernel_) / stride_ + 1; }

 private:
  int in_channels_, out_channels_, kernel_, stride_, padding_;
  bool has_bias_;
  bool input_grad_ = true;
  Parameter weight_;  // [out, in, k, k]
  Parameter bias_;    // [out]
  Tensor input_;  // pointwise convolutions only
  std::vector<int> input_shape_;
  FloatBuffer cols_;  // unfolded training input, one block per sample
};

// Batch normalization over axis 1. Works for [N, C] and [N, C, H, W].
class BatchNorm : public Layer {
 public:
  BatchNorm(int channels, ParamGroup group, float momentum = 0.1f, float eps = 1e-5f);

  Tensor Forward(const Tensor& x, const Context& ctx) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) override;
  void CollectBuffers(const std::string& prefix, std::vector<Buffer>& out) override;

  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }

 private:
  int channels_;
  float momentum_, eps_;
  Parameter gamma_, beta_;
  Tensor running_mean_, running_var_;
  Tensor xhat_;
  std::vector<float> inv_std_;
};

class ReLU : public Layer {
 public:
  Tensor Forward(const Tensor& x, const Context& ctx) override;
  Tensor Backward(const Tensor& grad_out) override;

 private:
  Tensor output_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int padding)
      : kernel_(kernel), stride_(stride), padding_(padding) {}

  Tensor Forward(const Tensor& x, const Context& ctx) override;
  Tensor Backward(const Tensor& grad_out) override;

 private:
  int kernel_, stride_, padding_;
  std::vector<int> input_shape_;
  std::vector<std::uint32_t> argmax_;
};

// y = x W^T + b on [N, in] inputs.
class Linear : public Layer {
 public:
  Linear(int in_features, int out_features, ParamGroup group);

  Tensor Forward(const Tensor& x, const Context& ctx) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) override;

  void KaimingInitFanOut(Rng& rng);
  void NormalInit(Rng& rng, float stddev);

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int in_features_, out_features_;
  Parameter weight_;  // [out, in]
  Parameter bias_;    // [out]
  Tensor input_;
};

class Dropout : public Layer {
 public:
  explicit Dropout(float rate) : rate_(rate) {}

  Tensor Forward(const Tensor& x, const Context& ctx) override;
  Tensor Backward(const Tensor& grad_out) override;

 private:
  float rate_;
  std::vector<float> mask_;
};

// Ordered chain of named children; parameter names are prefix.child.param.
class Sequential : public Layer {
 public:
  Layer& Add(std::string name, std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  L& Emplace(std::string name, Args&&... args) {
    return static_cast<L&>(Add(std::move(name), std::make_unique<L>(std::forward<Args>(args)...)));
  }

  Tensor Forward(const Tensor& x, const Context& ctx) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) override;
  void CollectBuffers(const std::string& prefix, std::vector<Buffer>& out) override;

  std::size_t size() const { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_[i].second; }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer>>> layers_;
};

// Residual bottleneck (1x1 -> 3x3 -> 1x1, expansion 4) with the stride on
// the 3x3 convolution.
class Bottleneck : public Layer {
 public:
  Bottleneck(int in_channels, int width, int stride, Rng& rng);

  Tensor Forward(const Tensor& x, const Context& ctx) override;
  Tensor Backward(const Tensor& grad_out) override;
  void CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) override;
  void CollectBuffers(const std::string& prefix, std::vector<Buffer>& out) override;

 private:
  Sequential main_;
  std::unique_ptr<Sequential> downsample_;
  ReLU out_relu_;
};

// Elementwise helpers.
void AddInPlace(Tensor& dst, const Tensor& src);

}  // namespace lpn::nn

#endif  // LPN_NN_H_
