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
#include "lpn/tensor.h"

#include <algorithm>
#include <numeric>

#include "lpn/errors.h"

namespace lpn {

std::size_t NumElements(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ConfigError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (data_.size() != NumElements(shape_)) {
    throw ConfigError("tensor data size " + std::to_string(data_.size()) +
                      " does not match shape " + ShapeString());
  }
}

void Tensor::Fill(float v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::Reshape(std::vector<int> shape) {
  if (NumElements(shape) != data_.size()) {
    throw ConfigError("cannot reshape " + ShapeString() + " to a different element count");
  }
  shape_ = std::move(shape);
}

std::string Tensor::ShapeString() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

Tensor Stack(std::span<const Tensor> items) {
  if (items.empty()) return {};
  std::vector<int> shape = items[0].shape();
  shape.insert(shape.begin(), static_cast<int>(items.size()));
  Tensor out(shape);
  const std::size_t each = items[0].size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != items[0].shape()) throw ConfigError("Stack: shape mismatch");
    std::copy(items[i].values().begin(), items[i].values().end(), out.data() + i * each);
  }
  return out;
}

Tensor Concat0(std::span<const Tensor* const> items) {
  if (items.empty()) return {};
  std::vector<int> shape = items[0]->shape();
  int rows = 0;
  for (const Tensor* t : items) {
    if (t->ndim() != static_cast<int>(shape.size()) ||
        !std::equal(shape.begin() + 1, shape.end(), t->shape().begin() + 1)) {
      throw ConfigError("Concat0: trailing shapes differ");
    }
    rows += t->dim(0);
  }
  shape[0] = rows;
  Tensor out(shape);
  float* dst = out.data();
  for (const Tensor* t : items) dst = std::copy(t->values().begin(), t->values().end(), dst);
  return out;
}

}  // namespace lpn
