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
#ifndef LPN_PARTITION_H_
#define LPN_PARTITION_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lpn {

enum class PartitionStrategy { kSquareRing, kRow, kColumn };

std::string_view StrategyName(PartitionStrategy strategy);
// Accepts "square_ring" / "ring", "row", "column" / "col". Throws ConfigError.
PartitionStrategy ParseStrategy(std::string_view name);

struct PartitionSpec {
  PartitionStrategy strategy = PartitionStrategy::kSquareRing;
  int num_parts = 4;

  // Largest admissible part count for an height x width map.
  int MaxParts(int height, int width) const;
  // Throws ConfigError naming the violated bound.
  void Validate(int height, int width) const;

  std::string ToString() const;
  // Inverse of ToString(), e.g. "square_ring:4".
  static PartitionSpec Parse(std::string_view text);

  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

// H x W x C map. Storage is channel-major (C, H, W) so that one sample of a
// NCHW batch can be viewed without copying.
template <typename T>
class BasicFeatureMap {
 public:
  BasicFeatureMap() = default;
  BasicFeatureMap(int height, int width, int channels, T fill = T(0));
  BasicFeatureMap(int height, int width, int channels, std::vector<T> chw);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }

  T& at(int h, int w, int c) { return data_[(static_cast<std::size_t>(c) * height_ + h) * width_ + w]; }
  const T& at(int h, int w, int c) const {
    return data_[(static_cast<std::size_t>(c) * height_ + h) * width_ + w];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using FeatureMap = BasicFeatureMap<float>;

// Immutable cell -> part map. Part indices are 1-based.
class PartAssignment {
 public:
  // Builds from an explicit grid (row-major, values in [1, num_parts]).
  // Throws ConfigError if a value is out of range or a part is empty.
  PartAssignment(int height, int width, int num_parts, std::vector<int> grid);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_parts() const { return num_parts_; }

  int part(int h, int w) const { return grid_[static_cast<std::size_t>(h) * width_ + w]; }
  std::span<const int> grid() const { return grid_; }
  // Number of cells in part i (1-based).
  int cell_count(int part) const { return counts_[part - 1]; }
  std::span<const int> cell_counts() const { return counts_; }

  // Plain-text grid: `height` lines of `width` space-separated part indices.
  void WriteText(std::ostream& os) const;
  static PartAssignment ReadText(std::istream& is);

  friend bool operator==(const PartAssignment& a, const PartAssignment& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ &&
           a.num_parts_ == b.num_parts_ && a.grid_ == b.grid_;
  }

 private:
  int height_;
  int width_;
  int num_parts_;
  std::vector<int> grid_;
  std::vector<int> counts_;
};

// Deterministic assignment for `spec` on a height x width map.
//
// Square rings are measured from the central band (one row/column for odd
// sizes, two for even sizes). Each axis distance is rescaled to
// m = ceil(min(H, W) / 2) levels, the cell level is the max over both axes,
// and ring i holds levels floor((i-1)m/n) <= level < floor(im/n). Row and
// column bands use the same floor rule on the row/column index, so
// remainders always land in the later (outer) parts.
PartAssignment BuildAssignment(const PartitionSpec& spec, int height, int width);

// Per-part channel means of one C x H x W sample. `out` holds num_parts * C
// values, part-major (part 1 first).
template <typename T>
void PoolParts(std::span<const T> chw, int channels, const PartAssignment& assignment,
               std::span<T> out);

// Adjoint of PoolParts: `grad_chw` receives upstream[part(h,w)][c] / |part|.
template <typename T>
void PoolPartsGradient(std::span<const T> upstream, int channels,
                       const PartAssignment& assignment, std::span<T> grad_chw);

template <typename T>
struct BasicPartDescriptor {
  int part_index;  // 1-based
  std::vector<T> values;
};

using PartDescriptor = BasicPartDescriptor<float>;

template <typename T>
std::vector<BasicPartDescriptor<T>> PartitionPool(const BasicFeatureMap<T>& map,
                                                  const PartAssignment& assignment);

// `upstream` holds one length-C vector per part.
template <typename T>
BasicFeatureMap<T> PoolGradient(const BasicFeatureMap<T>& map, const PartAssignment& assignment,
                                const std::vector<std::vector<T>>& upstream);

}  // namespace lpn

#endif  // LPN_PARTITION_H_
