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
#include "lpn/partition.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "lpn/errors.h"

namespace lpn {
namespace {

int CeilHalf(int x) { return (x + 1) / 2; }

// Distance of `index` from the central band of an axis of length `size`.
int BandDistance(int index, int size) {
  if (size % 2 == 1) return std::abs(index - size / 2);
  return index < size / 2 ? size / 2 - 1 - index : index - size / 2;
}

// floor((i-1) * levels / n) <= level < floor(i * levels / n), 1-based i.
int BinOf(int level, int levels, int num_parts) {
  int part = 1;
  while (part < num_parts &&
         level >= static_cast<long>(part) * levels / num_parts) {
    ++part;
  }
  return part;
}

void CheckShape(const PartAssignment& a, std::size_t size, int channels, const char* what) {
  if (channels < 1 ||
      size != static_cast<std::size_t>(channels) * a.height() * a.width()) {
    throw ConfigError(std::string(what) + ": feature map of " + std::to_string(size) +
                      " values does not match assignment " + std::to_string(a.height()) +
                      "x" + std::to_string(a.width()) + " with " + std::to_string(channels) +
                      " channels");
  }
}

}  // namespace

std::string_view StrategyName(PartitionStrategy strategy) {
  switch (strategy) {
    case PartitionStrategy::kSquareRing: return "square_ring";
    case PartitionStrategy::kRow: return "row";
    case PartitionStrategy::kColumn: return "column";
  }
  return "unknown";
}

PartitionStrategy ParseStrategy(std::string_view name) {
  if (name == "square_ring" || name == "ring") return PartitionStrategy::kSquareRing;
  if (name == "row") return PartitionStrategy::kRow;
  if (name == "column" || name == "col") return PartitionStrategy::kColumn;
  throw ConfigError("unknown partition strategy '" + std::string(name) + "'");
}

int PartitionSpec::MaxParts(int height, int width) const {
  switch (strategy) {
    case PartitionStrategy::kSquareRing: return CeilHalf(std::min(height, width));
    case PartitionStrategy::kRow: return height;
    case PartitionStrategy::kColumn: return width;
  }
  return 0;
}

void PartitionSpec::Validate(int height, int width) const {
  if (height < 1 || width < 1) {
    throw ConfigError("feature map must be at least 1x1, got " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  if (num_parts < 1) {
    throw ConfigError("part count n must be >= 1, got " + std::to_string(num_parts));
  }
  const int max_parts = MaxParts(height, width);
  if (num_parts > max_parts) {
    std::string bound;
    switch (strategy) {
      case PartitionStrategy::kSquareRing: bound = "ceil(min(H,W)/2)"; break;
      case PartitionStrategy::kRow: bound = "H"; break;
      case PartitionStrategy::kColumn: bound = "W"; break;
    }
    throw ConfigError(std::string(StrategyName(strategy)) + " partition requires n <= " + bound +
                      " = " + std::to_string(max_parts) + " on a " + std::to_string(height) +
                      "x" + std::to_string(width) + " map, got n = " +
                      std::to_string(num_parts));
  }
}

std::string PartitionSpec::ToString() const {
  return std::string(StrategyName(strategy)) + ":" + std::to_string(num_parts);
}

PartitionSpec PartitionSpec::Parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("partition spec must look like 'square_ring:4', got '" + std::string(text) +
                      "'");
  }
  PartitionSpec spec;
  spec.strategy = ParseStrategy(text.substr(0, colon));
  try {
    std::size_t used = 0;
    const std::string count(text.substr(colon + 1));
    spec.num_parts = std::stoi(count, &used);
    if (used != count.size()) throw std::invalid_argument(count);
  } catch (const std::logic_error&) {
    throw ConfigError("bad part count in partition spec '" + std::string(text) + "'");
  }
  if (spec.num_parts < 1) throw ConfigError("part count n must be >= 1");
  return spec;
}

template <typename T>
BasicFeatureMap<T>::BasicFeatureMap(int height, int width, int channels, T fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ConfigError("feature map dims must be positive");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

template <typename T>
BasicFeatureMap<T>::BasicFeatureMap(int height, int width, int channels, std::vector<T> chw)
    : height_(height), width_(width), channels_(channels), data_(std::move(chw)) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ConfigError("feature map dims must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ConfigError("feature map data size does not match dims");
  }
}

template class BasicFeatureMap<float>;
template class BasicFeatureMap<double>;

PartAssignment::PartAssignment(int height, int width, int num_parts, std::vector<int> grid)
    : height_(height), width_(width), num_parts_(num_parts), grid_(std::move(grid)) {
  if (height < 1 || width < 1 || num_parts < 1) {
    throw ConfigError("assignment dims and part count must be positive");
  }
  if (grid_.size() != static_cast<std::size_t>(height) * width) {
    throw ConfigError("assignment grid has " + std::to_string(grid_.size()) +
                      " cells, expected " + std::to_string(height * width));
  }
  counts_.assign(num_parts, 0);
  for (int v : grid_) {
    if (v < 1 || v > num_parts) {
      throw ConfigError("assignment cell value " + std::to_string(v) + " outside [1, " +
                        std::to_string(num_parts) + "]");
    }
    ++counts_[v - 1];
  }
  for (int i = 0; i < num_parts; ++i) {
    if (counts_[i] == 0) throw ConfigError("part " + std::to_string(i + 1) + " has no cells");
  }
}

void PartAssignment::WriteText(std::ostream& os) const {
  for (int h = 0; h < height_; ++h) {
    for (int w = 0; w < width_; ++w) {
      if (w) os << ' ';
      os << part(h, w);
    }
    os << '\n';
  }
}

PartAssignment PartAssignment::ReadText(std::istream& is) {
  std::vector<int> grid;
  int width = -1;
  int height = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    int value = 0;
    int count = 0;
    while (row >> value) {
      grid.push_back(value);
      ++count;
    }
    if (!row.eof()) throw DataError("non-integer token in assignment grid row " +
                                    std::to_string(height + 1));
    if (width >= 0 && count != width) {
      throw DataError("assignment grid row " + std::to_string(height + 1) + " has " +
                      std::to_string(count) + " cells, expected " + std::to_string(width));
    }
    width = count;
    ++height;
  }
  if (height == 0) throw DataError("empty assignment grid");
  const int num_parts = *std::max_element(grid.begin(), grid.end());
  return PartAssignment(height, width, num_parts, std::move(grid));
}

PartAssignment BuildAssignment(const PartitionSpec& spec, int height, int width) {
  spec.Validate(height, width);
  const int n = spec.num_parts;
  std::vector<int> grid(static_cast<std::size_t>(height) * width);
  switch (spec.strategy) {
    case PartitionStrategy::kSquareRing: {
      const int levels = CeilHalf(std::min(height, width));
      const int row_levels = CeilHalf(height);
      const int col_levels = CeilHalf(width);
      for (int h = 0; h < height; ++h) {
        const int lr = BandDistance(h, height) * levels / row_levels;
        for (int w = 0; w < width; ++w) {
          const int lc = BandDistance(w, width) * levels / col_levels;
          grid[static_cast<std::size_t>(h) * width + w] = BinOf(std::max(lr, lc), levels, n);
        }
      }
      break;
    }
    case PartitionStrategy::kRow:
      for (int h = 0; h < height; ++h) {
        std::fill_n(grid.begin() + static_cast<std::ptrdiff_t>(h) * width, width,
                    BinOf(h, height, n));
      }
      break;
    case PartitionStrategy::kColumn:
      for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
          grid[static_cast<std::size_t>(h) * width + w] = BinOf(w, width, n);
        }
      }
      break;
  }
  return PartAssignment(height, width, n, std::move(grid));
}

template <typename T>
void PoolParts(std::span<const T> chw, int channels, const PartAssignment& assignment,
               std::span<T> out) {
  CheckShape(assignment, chw.size(), channels, "PoolParts");
  const int n = assignment.num_parts();
  if (out.size() != static_cast<std::size_t>(n) * channels) {
    throw ConfigError("PoolParts: output must hold num_parts * channels values");
  }
  const std::size_t plane = static_cast<std::size_t>(assignment.height()) * assignment.width();
  const auto grid = assignment.grid();
  std::vector<T> sums(n);
  for (int c = 0; c < channels; ++c) {
    std::fill(sums.begin(), sums.end(), T(0));
    const T* src = chw.data() + c * plane;
    for (std::size_t k = 0; k < plane; ++k) sums[grid[k] - 1] += src[k];
    for (int i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i) * channels + c] = sums[i] / T(assignment.cell_count(i + 1));
    }
  }
}

template <typename T>
void PoolPartsGradient(std::span<const T> upstream, int channels,
                       const PartAssignment& assignment, std::span<T> grad_chw) {
  CheckShape(assignment, grad_chw.size(), channels, "PoolPartsGradient");
  const int n = assignment.num_parts();
  if (upstream.size() != static_cast<std::size_t>(n) * channels) {
    throw ConfigError("PoolPartsGradient: upstream must hold num_parts * channels values");
  }
  const std::size_t plane = static_cast<std::size_t>(assignment.height()) * assignment.width();
  const auto grid = assignment.grid();
  std::vector<T> scaled(n);
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < n; ++i) {
      scaled[i] = upstream[static_cast<std::size_t>(i) * channels + c] /
                  T(assignment.cell_count(i + 1));
    }
    T* dst = grad_chw.data() + c * plane;
    for (std::size_t k = 0; k < plane; ++k) dst[k] = scaled[grid[k] - 1];
  }
}

template <typename T>
std::vector<BasicPartDescriptor<T>> PartitionPool(const BasicFeatureMap<T>& map,
                                                  const PartAssignment& assignment) {
  if (map.height() != assignment.height() || map.width() != assignment.width()) {
    throw ConfigError("PartitionPool: map is " + std::to_string(map.height()) + "x" +
                      std::to_string(map.width()) + " but assignment is " +
                      std::to_string(assignment.height()) + "x" +
                      std::to_string(assignment.width()));
  }
  const int channels = map.channels();
  std::vector<T> flat(static_cast<std::size_t>(assignment.num_parts()) * channels);
  PoolParts<T>(map.data(), channels, assignment, flat);
  std::vector<BasicPartDescriptor<T>> parts(assignment.num_parts());
  for (int i = 0; i < assignment.num_parts(); ++i) {
    parts[i].part_index = i + 1;
    parts[i].values.assign(flat.begin() + static_cast<std::ptrdiff_t>(i) * channels,
                           flat.begin() + static_cast<std::ptrdiff_t>(i + 1) * channels);
  }
  return parts;
}

template <typename T>
BasicFeatureMap<T> PoolGradient(const BasicFeatureMap<T>& map, const PartAssignment& assignment,
                                const std::vector<std::vector<T>>& upstream) {
  if (map.height() != assignment.height() || map.width() != assignment.width()) {
    throw ConfigError("PoolGradient: map and assignment shapes differ");
  }
  const int channels = map.channels();
  if (upstream.size() != static_cast<std::size_t>(assignment.num_parts())) {
    throw ConfigError("PoolGradient: expected " + std::to_string(assignment.num_parts()) +
                      " upstream vectors, got " + std::to_string(upstream.size()));
  }
  std::vector<T> flat;
  flat.reserve(upstream.size() * channels);
  for (const auto& u : upstream) {
    if (u.size() != static_cast<std::size_t>(channels)) {
      throw ConfigError("PoolGradient: upstream vector length must equal channel count");
    }
    flat.insert(flat.end(), u.begin(), u.end());
  }
  BasicFeatureMap<T> grad(map.height(), map.width(), channels);
  PoolPartsGradient<T>(flat, channels, assignment, grad.data());
  return grad;
}

#define LPN_INSTANTIATE_POOLING(T)                                                            \
  template void PoolParts<T>(std::span<const T>, int, const PartAssignment&, std::span<T>);   \
  template void PoolPartsGradient<T>(std::span<const T>, int, const PartAssignment&,          \
                                     std::span<T>);                                           \
  template std::vector<BasicPartDescriptor<T>> PartitionPool<T>(const BasicFeatureMap<T>&,    \
                                                                const PartAssignment&);       \
  template BasicFeatureMap<T> PoolGradient<T>(const BasicFeatureMap<T>&, const PartAssignment&, \
                                              const std::vector<std::vector<T>>&);

LPN_INSTANTIATE_POOLING(float)
LPN_INSTANTIATE_POOLING(double)

#undef LPN_INSTANTIATE_POOLING

}  // namespace lpn
