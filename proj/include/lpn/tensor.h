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
#ifndef LPN_TENSOR_H_
#define LPN_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace lpn {

// Cache-line aligned storage. Eigen peels unaligned heads off its vectorized
// reductions, so the rounding of a sum would otherwise depend on where the
// heap happened to place the buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t n) noexcept { ::operator delete(p, n * sizeof(T), kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

// Dense row-major float tensor. Image batches are NCHW.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);
  Tensor(std::vector<int> shape, std::vector<float> data);

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[i]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> span() { return data_; }
  std::span<const float> span() const { return data_; }
  FloatBuffer& values() { return data_; }
  const FloatBuffer& values() const { return data_; }
  std::vector<float> ToVector() const { return {data_.begin(), data_.end()}; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Elements per leading-dimension slice (e.g. C*H*W for NCHW).
  std::size_t stride0() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }
  std::span<float> slice(int i) { return {data_.data() + i * stride0(), stride0()}; }
  std::span<const float> slice(int i) const { return {data_.data() + i * stride0(), stride0()}; }

  void Fill(float v);
  void Reshape(std::vector<int> shape);
  std::string ShapeString() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  FloatBuffer data_;
};

std::size_t NumElements(const std::vector<int>& shape);

// Stacks equally shaped tensors along a new leading axis.
Tensor Stack(std::span<const Tensor> items);
// Concatenates along axis 0.
Tensor Concat0(std::span<const Tensor* const> items);

}  // namespace lpn

#endif  // LPN_TENSOR_H_
