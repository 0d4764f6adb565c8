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
#include "lpn/nn.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "lpn/errors.h"

namespace lpn::nn {
namespace {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// Sum of f(0..n-1) with a fixed lane layout. Eigen reductions peel a scalar
// head up to the first aligned element, which makes the rounding depend on
// where the allocator put the buffer; this keeps reruns bit-identical.
template <typename F>
float LaneSum(std::size_t n, F f) {
  constexpr std::size_t kLanes = 8;
  float acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += f(i + j);
  }
  float tail = 0.0f;
  for (; i < n; ++i) tail += f(i);
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

Parameter MakeParam(std::vector<int> shape, ParamGroup group, float fill = 0.0f) {
  Parameter p;
  p.value = Tensor(shape, fill);
  p.grad = Tensor(std::move(shape));
  p.group = group;
  return p;
}

// Output columns [lo, hi) whose input column ow*stride - pad + kw is in range.
inline void ValidRange(int kw, int stride, int pad, int width, int out_w, int& lo, int& hi) {
  const int shift = pad - kw;
  lo = shift <= 0 ? 0 : (shift + stride - 1) / stride;
  hi = (width - 1 + shift) < 0 ? 0 : (width - 1 + shift) / stride + 1;
  lo = std::min(lo, out_w);
  hi = std::clamp(hi, lo, out_w);
}

void Im2Col(const float* img, int channels, int height, int width, int kernel, int stride,
            int pad, int out_h, int out_w, float* col) {
  for (int c = 0; c < channels; ++c) {
    for (int kh = 0; kh < kernel; ++kh) {
      for (int kw = 0; kw < kernel; ++kw) {
        int lo, hi;
        ValidRange(kw, stride, pad, width, out_w, lo, hi);
        for (int oh = 0; oh < out_h; ++oh, col += out_w) {
          const int ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= height) {
            std::fill_n(col, out_w, 0.0f);
            continue;
          }
          const float* row = img + (static_cast<std::size_t>(c) * height + ih) * width;
          const int shift = kw - pad;
          std::fill_n(col, lo, 0.0f);
          if (stride == 1) {
            std::copy(row + lo + shift, row + hi + shift, col + lo);
          } else {
            for (int ow = lo; ow < hi; ++ow) col[ow] = row[ow * stride + shift];
          }
          std::fill(col + hi, col + out_w, 0.0f);
        }
      }
    }
  }
}

void Col2Im(const float* col, int channels, int height, int width, int kernel, int stride,
            int pad, int out_h, int out_w, float* img) {
  std::fill_n(img, static_cast<std::size_t>(channels) * height * width, 0.0f);
  for (int c = 0; c < channels; ++c) {
    for (int kh = 0; kh < kernel; ++kh) {
      for (int kw = 0; kw < kernel; ++kw) {
        int lo, hi;
        ValidRange(kw, stride, pad, width, out_w, lo, hi);
        for (int oh = 0; oh < out_h; ++oh, col += out_w) {
          const int ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= height) continue;
          float* row = img + (static_cast<std::size_t>(c) * height + ih) * width;
          const int shift = kw - pad;
          for (int ow = lo; ow < hi; ++ow) row[ow * stride + shift] += col[ow];
        }
      }
    }
  }
}

void ZeroInit(Parameter& p) { p.value.Fill(0.0f); }

}  // namespace

void AddInPlace(Tensor& dst, const Tensor& src) {
  if (dst.size() != src.size()) throw ConfigError("AddInPlace: size mismatch");
  float* d = dst.data();
  const float* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding,
               bool bias, ParamGroup group)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      has_bias_(bias),
      weight_(MakeParam({out_channels, in_channels, kernel, kernel}, group)),
      bias_(MakeParam({out_channels}, group)) {}

void Conv2d::KaimingInit(Rng& rng) {
  const float stddev = std::sqrt(2.0f / static_cast<float>(out_channels_ * kernel_ * kernel_));
  std::normal_distribution<float> dist(0.0f, stddev);
  for (float& w : weight_.value.values()) w = dist(rng);
  ZeroInit(bias_);
}

Tensor Conv2d::Forward(const Tensor& x, const Context& ctx) {
  if (x.ndim() != 4 || x.dim(1) != in_channels_) {
    throw ConfigError("Conv2d expects [N, " + std::to_string(in_channels_) + ", H, W], got " +
                      x.ShapeString());
  }
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = OutputSize(h), ow = OutputSize(w);
  if (oh < 1 || ow < 1) throw ConfigError("Conv2d input " + x.ShapeString() + " too small");
  const int k = in_channels_ * kernel_ * kernel_;
  const int p = oh * ow;
  Tensor out({n, out_channels_, oh, ow});
  const ConstMapRM wmat(weight_.value.data(), out_channels_, k);
  const bool pointwise = kernel_ == 1 && stride_ == 1 && padding_ == 0;
  // In training the unfolded input is kept for the weight gradient.
  const std::size_t col_size = static_cast<std::size_t>(k) * p;
  FloatBuffer scratch;
  float* cols = nullptr;
  if (!pointwise) {
    if (ctx.training) {
      // Grows only; Im2Col overwrites every entry.
      if (cols_.size() < col_size * n) cols_.resize(col_size * n);
      cols = cols_.data();
    } else {
      scratch.resize(col_size);
      cols = scratch.data();
    }
  }
  for (int i = 0; i < n; ++i) {
    const float* src = x.slice(i).data();
    if (!pointwise) {
      float* col = ctx.training ? cols + col_size * i : cols;
      Im2Col(src, in_channels_, h, w, kernel_, stride_, padding_, oh, ow, col);
      src = col;
    }
    MapRM dst(out.slice(i).data(), out_channels_, p);
    dst.noalias() = wmat * ConstMapRM(src, k, p);
    if (has_bias_) {
      dst.colwise() += Eigen::Map<const Eigen::VectorXf>(bias_.value.data(), out_channels_);
    }
  }
  if (ctx.training) {
    input_shape_ = x.shape();
    if (pointwise) input_ = x;
  }
  return out;
}

Tensor Conv2d::Backward(const Tensor& grad_out) {
  if (input_shape_.empty()) throw ConfigError("Conv2d::Backward without training forward");
  const int n = input_shape_[0], h = input_shape_[2], w = input_shape_[3];
  const int oh = grad_out.dim(2), ow = grad_out.dim(3);
  const int k = in_channels_ * kernel_ * kernel_;
  const int p = oh * ow;
  const std::size_t col_size = static_cast<std::size_t>(k) * p;
  const bool pointwise = kernel_ == 1 && stride_ == 1 && padding_ == 0;
  const ConstMapRM wmat(weight_.value.data(), out_channels_, k);
  MapRM dw(weight_.grad.data(), out_channels_, k);
  Tensor grad_in;
  if (input_grad_) grad_in = Tensor(input_shape_);
  FloatBuffer dcol(pointwise || !input_grad_ ? 0 : col_size);
  for (int i = 0; i < n; ++i) {
    const ConstMapRM dy(grad_out.slice(i).data(), out_channels_, p);
    const float* src = pointwise ? input_.slice(i).data() : cols_.data() + col_size * i;
    dw.noalias() += dy * ConstMapRM(src, k, p).transpose();
    if (has_bias_) {
      for (int o = 0; o < out_channels_; ++o) {
        const float* row = dy.data() + static_cast<std::size_t>(o) * p;
        bias_.grad[o] += LaneSum(p, [row](std::size_t k) { return row[k]; });
      }
    }
    if (input_grad_) {
      if (pointwise) {
        MapRM(grad_in.slice(i).data(), k, p).noalias() = wmat.transpose() * dy;
      } else {
        MapRM(dcol.data(), k, p).noalias() = wmat.transpose() * dy;
        Col2Im(dcol.data(), in_channels_, h, w, kernel_, stride_, padding_, oh, ow,
               grad_in.slice(i).data());
      }
    }
  }
  input_ = Tensor();
  input_shape_.clear();
  return grad_in;
}

void Conv2d::CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) {
  weight_.name = prefix + "weight";
  out.push_back(&weight_);
  if (has_bias_) {
    bias_.name = prefix + "bias";
    out.push_back(&bias_);
  }
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(int channels, ParamGroup group, float momentum, float eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(MakeParam({channels}, group, 1.0f)),
      beta_(MakeParam({channels}, group, 0.0f)),
      running_mean_({channels}, 0.0f),
      running_var_({channels}, 1.0f) {}

Tensor BatchNorm::Forward(const Tensor& x, const Context& ctx) {
  if (x.ndim() < 2 || x.dim(1) != channels_) {
    throw ConfigError("BatchNorm expects [N, " + std::to_string(channels_) + ", ...], got " +
                      x.ShapeString());
  }
  const int n = x.dim(0);
  const std::size_t spatial = x.size() / (static_cast<std::size_t>(n) * channels_);
  const std::size_t count = static_cast<std::size_t>(n) * spatial;
  Tensor out(x.shape());
  const float* src = x.data();
  float* dst = out.data();
  auto offset = [&](int i, int c) { return (static_cast<std::size_t>(i) * channels_ + c) * spatial; };

  if (!ctx.training) {
    for (int c = 0; c < channels_; ++c) {
      const float scale = gamma_.value[c] / std::sqrt(running_var_[c] + eps_);
      const float shift = beta_.value[c] - running_mean_[c] * scale;
      for (int i = 0; i < n; ++i) {
        const float* s = src + offset(i, c);
        float* d = dst + offset(i, c);
        for (std::size_t k = 0; k < spatial; ++k) d[k] = s[k] * scale + shift;
      }
    }
    return out;
  }

  xhat_ = Tensor(x.shape());
  inv_std_.assign(channels_, 0.0f);
  for (int c = 0; c < channels_; ++c) {
    // Float sums per plane, accumulated across planes in double.
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* s = src + offset(i, c);
      sum += LaneSum(spatial, [s](std::size_t k) { return s[k]; });
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* s = src + offset(i, c);
      const float m = static_cast<float>(mean);
      sq += LaneSum(spatial, [s, m](std::size_t k) { return (s[k] - m) * (s[k] - m); });
    }
    const double var = sq / static_cast<double>(count);
    const float inv_std = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[c] = inv_std;
    const float g = gamma_.value[c], b = beta_.value[c];
    const float fmean = static_cast<float>(mean);
    for (int i = 0; i < n; ++i) {
      const float* s = src + offset(i, c);
      float* xh = xhat_.data() + offset(i, c);
      float* d = dst + offset(i, c);
      for (std::size_t k = 0; k < spatial; ++k) {
        xh[k] = (s[k] - fmean) * inv_std;
        d[k] = xh[k] * g + b;
      }
    }
    const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
    running_mean_[c] = (1.0f - momentum_) * running_mean_[c] + momentum_ * fmean;
    running_var_[c] =
        (1.0f - momentum_) * running_var_[c] + momentum_ * static_cast<float>(unbiased);
  }
  return out;
}

Tensor BatchNorm::Backward(const Tensor& grad_out) {
  if (xhat_.empty()) throw ConfigError("BatchNorm::Backward without training forward");
  const int n = grad_out.dim(0);
  const std::size_t spatial = grad_out.size() / (static_cast<std::size_t>(n) * channels_);
  const double count = static_cast<double>(n) * static_cast<double>(spatial);
  Tensor grad_in(grad_out.shape());
  auto offset = [&](int i, int c) { return (static_cast<std::size_t>(i) * channels_ + c) * spatial; };
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* dy = grad_out.data() + offset(i, c);
      const float* xh = xhat_.data() + offset(i, c);
      sum_dy += LaneSum(spatial, [dy](std::size_t k) { return dy[k]; });
      sum_dy_xhat += LaneSum(spatial, [dy, xh](std::size_t k) { return dy[k] * xh[k]; });
    }
    gamma_.grad[c] += static_cast<float>(sum_dy_xhat);
    beta_.grad[c] += static_cast<float>(sum_dy);
    const float scale = gamma_.value[c] * inv_std_[c];
    const float mean_dy = static_cast<float>(sum_dy / count);
    const float mean_dy_xhat = static_cast<float>(sum_dy_xhat / count);
    for (int i = 0; i < n; ++i) {
      const float* dy = grad_out.data() + offset(i, c);
      const float* xh = xhat_.data() + offset(i, c);
      float* dx = grad_in.data() + offset(i, c);
      for (std::size_t k = 0; k < spatial; ++k) {
        dx[k] = scale * (dy[k] - mean_dy - xh[k] * mean_dy_xhat);
      }
    }
  }
  xhat_ = Tensor();
  return grad_in;
}

void BatchNorm::CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) {
  gamma_.name = prefix + "weight";
  beta_.name = prefix + "bias";
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm::CollectBuffers(const std::string& prefix, std::vector<Buffer>& out) {
  out.push_back({prefix + "running_mean", &running_mean_});
  out.push_back({prefix + "running_var", &running_var_});
}

// ---------------------------------------------------------------------------
// ReLU / MaxPool2d / Dropout

Tensor ReLU::Forward(const Tensor& x, const Context& ctx) {
  Tensor out(x.shape());
  const float* s = x.data();
  float* d = out.data();
  // NaN passes through, as in torch.
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = s[i] < 0.0f ? 0.0f : s[i];
  if (ctx.training) output_ = out;
  return out;
}

Tensor ReLU::Backward(const Tensor& grad_out) {
  if (output_.empty()) throw ConfigError("ReLU::Backward without training forward");
  Tensor grad_in(grad_out.shape());
  const float* y = output_.data();
  const float* dy = grad_out.data();
  float* dx = grad_in.data();
  for (std::size_t i = 0; i < grad_out.size(); ++i) dx[i] = y[i] > 0.0f ? dy[i] : 0.0f;
  output_ = Tensor();
  return grad_in;
}

Tensor MaxPool2d::Forward(const Tensor& x, const Context& ctx) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = (h + 2 * padding_ - kernel_) / stride_ + 1;
  const int ow = (w + 2 * padding_ - kernel_) / stride_ + 1;
  Tensor out({n, c, oh, ow});
  if (ctx.training) {
    input_shape_ = x.shape();
    argmax_.assign(out.size(), 0);
  }
  std::size_t o = 0;
  for (int plane = 0; plane < n * c; ++plane) {
    const float* src = x.data() + static_cast<std::size_t>(plane) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int xo = 0; xo < ow; ++xo, ++o) {
        float best = -std::numeric_limits<float>::infinity();
        std::uint32_t best_idx = 0;
        for (int ky = 0; ky < kernel_; ++ky) {
          const int iy = y * stride_ - padding_ + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kernel_; ++kx) {
            const int ix = xo * stride_ - padding_ + kx;
            if (ix < 0 || ix >= w) continue;
            const float v = src[iy * w + ix];
            if (v > best || std::isnan(v)) {
              best = v;
              best_idx = static_cast<std::uint32_t>(iy * w + ix);
            }
          }
        }
        out[o] = best;
        if (ctx.training) argmax_[o] = best_idx;
      }
    }
  }
  return out;
}

Tensor MaxPool2d::Backward(const Tensor& grad_out) {
  if (input_shape_.empty()) throw ConfigError("MaxPool2d::Backward without training forward");
  Tensor grad_in(input_shape_);
  const std::size_t plane_in = static_cast<std::size_t>(input_shape_[2]) * input_shape_[3];
  const std::size_t plane_out = static_cast<std::size_t>(grad_out.dim(2)) * grad_out.dim(3);
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    grad_in[(o / plane_out) * plane_in + argmax_[o]] += grad_out[o];
  }
  input_shape_.clear();
  return grad_in;
}

Tensor Dropout::Forward(const Tensor& x, const Context& ctx) {
  if (!ctx.training) return x;
  if (rate_ <= 0.0f) {
    mask_.clear();
    return x;
  }
  if (ctx.rng == nullptr) throw ConfigError("Dropout in training mode needs an rng");
  std::bernoulli_distribution keep(1.0 - rate_);
  const float scale = 1.0f / (1.0f - rate_);
  mask_.resize(x.size());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = keep(*ctx.rng) ? scale : 0.0f;
    out[i] = x[i] * mask_[i];
  }
  return out;
}

Tensor Dropout::Backward(const Tensor& grad_out) {
  if (mask_.empty()) return grad_out;
  Tensor grad_in(grad_out.shape());
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[i] = grad_out[i] * mask_[i];
  mask_.clear();
  return grad_in;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_features, int out_features, ParamGroup group)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(MakeParam({out_features, in_features}, group)),
      bias_(MakeParam({out_features}, group)) {}

void Linear::KaimingInitFanOut(Rng& rng) {
  std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(out_features_)));
  for (float& w : weight_.value.values()) w = dist(rng);
  ZeroInit(bias_);
}

void Linear::NormalInit(Rng& rng, float stddev) {
  std::normal_distribution<float> dist(0.0f, stddev);
  for (float& w : weight_.value.values()) w = dist(rng);
  ZeroInit(bias_);
}

Tensor Linear::Forward(const Tensor& x, const Context& ctx) {
  if (x.ndim() != 2 || x.dim(1) != in_features_) {
    throw ConfigError("Linear expects [N, " + std::to_string(in_features_) + "], got " +
                      x.ShapeString());
  }
  const int n = x.dim(0);
  Tensor out({n, out_features_});
  MapRM y(out.data(), n, out_features_);
  y.noalias() = ConstMapRM(x.data(), n, in_features_) *
                ConstMapRM(weight_.value.data(), out_features_, in_features_).transpose();
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias_.value.data(), out_features_);
  if (ctx.training) input_ = x;
  return out;
}

Tensor Linear::Backward(const Tensor& grad_out) {
  if (input_.empty()) throw ConfigError("Linear::Backward without training forward");
  const int n = input_.dim(0);
  const ConstMapRM dy(grad_out.data(), n, out_features_);
  MapRM(weight_.grad.data(), out_features_, in_features_).noalias() +=
      dy.transpose() * ConstMapRM(input_.data(), n, in_features_);
  Eigen::Map<Eigen::RowVectorXf>(bias_.grad.data(), out_features_) += dy.colwise().sum();
  Tensor grad_in({n, in_features_});
  MapRM(grad_in.data(), n, in_features_).noalias() =
      dy * ConstMapRM(weight_.value.data(), out_features_, in_features_);
  input_ = Tensor();
  return grad_in;
}

void Linear::CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) {
  weight_.name = prefix + "weight";
  bias_.name = prefix + "bias";
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------------------
// Sequential / Bottleneck

Layer& Sequential::Add(std::string name, std::unique_ptr<Layer> layer) {
  layers_.emplace_back(std::move(name), std::move(layer));
  return *layers_.back().second;
}

Tensor Sequential::Forward(const Tensor& x, const Context& ctx) {
  if (layers_.empty()) return x;
  Tensor h = layers_.front().second->Forward(x, ctx);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i].second->Forward(h, ctx);
  return h;
}

Tensor Sequential::Backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->Backward(g);
  return g;
}

void Sequential::CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) {
  for (auto& [name, layer] : layers_) layer->CollectParameters(prefix + name + ".", out);
}

void Sequential::CollectBuffers(const std::string& prefix, std::vector<Buffer>& out) {
  for (auto& [name, layer] : layers_) layer->CollectBuffers(prefix + name + ".", out);
}

Bottleneck::Bottleneck(int in_channels, int width, int stride, Rng& rng) {
  const int out_channels = width * 4;
  main_.Emplace<Conv2d>("conv1", in_channels, width, 1, 1, 0, false, ParamGroup::kBackbone)
      .KaimingInit(rng);
  main_.Emplace<BatchNorm>("bn1", width, ParamGroup::kBackbone);
  main_.Emplace<ReLU>("relu1");
  main_.Emplace<Conv2d>("conv2", width, width, 3, stride, 1, false, ParamGroup::kBackbone)
      .KaimingInit(rng);
  main_.Emplace<BatchNorm>("bn2", width, ParamGroup::kBackbone);
  main_.Emplace<ReLU>("relu2");
  main_.Emplace<Conv2d>("conv3", width, out_channels, 1, 1, 0, false, ParamGroup::kBackbone)
      .KaimingInit(rng);
  main_.Emplace<BatchNorm>("bn3", out_channels, ParamGroup::kBackbone);
  if (stride != 1 || in_channels != out_channels) {
    downsample_ = std::make_unique<Sequential>();
    downsample_
        ->Emplace<Conv2d>("0", in_channels, out_channels, 1, stride, 0, false,
                          ParamGroup::kBackbone)
        .KaimingInit(rng);
    downsample_->Emplace<BatchNorm>("1", out_channels, ParamGroup::kBackbone);
  }
}

Tensor Bottleneck::Forward(const Tensor& x, const Context& ctx) {
  Tensor y = main_.Forward(x, ctx);
  AddInPlace(y, downsample_ ? downsample_->Forward(x, ctx) : x);
  return out_relu_.Forward(y, ctx);
}

Tensor Bottleneck::Backward(const Tensor& grad_out) {
  const Tensor g = out_relu_.Backward(grad_out);
  Tensor grad_in = main_.Backward(g);
  AddInPlace(grad_in, downsample_ ? downsample_->Backward(g) : g);
  return grad_in;
}

void Bottleneck::CollectParameters(const std::string& prefix, std::vector<Parameter*>& out) {
  main_.CollectParameters(prefix, out);
  if (downsample_) downsample_->CollectParameters(prefix + "downsample.", out);
}

void Bottleneck::CollectBuffers(const std::string& prefix, std::vector<Buffer>& out) {
  main_.CollectBuffers(prefix, out);
  if (downsample_) downsample_->CollectBuffers(prefix + "downsample.", out);
}

}  // namespace lpn::nn
