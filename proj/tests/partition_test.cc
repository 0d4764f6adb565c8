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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "lpn/errors.h"

namespace lpn {
namespace {

template <typename T>
BasicFeatureMap<T> RandomMap(int h, int w, int c, std::mt19937_64& rng) {
  BasicFeatureMap<T> map(h, w, c);
  std::uniform_real_distribution<T> dist(-1, 1);
  for (T& v : map.data()) v = dist(rng);
  return map;
}

// Remaps a square map with (h, w) -> source(h, w) given by `src`.
template <typename F>
FeatureMap Remap(const FeatureMap& f, F src) {
  FeatureMap out(f.height(), f.width(), f.channels());
  for (int c = 0; c < f.channels(); ++c) {
    for (int h = 0; h < f.height(); ++h) {
      for (int w = 0; w < f.width(); ++w) {
        const auto [sh, sw] = src(h, w);
        out.at(h, w, c) = f.at(sh, sw, c);
      }
    }
  }
  return out;
}

double MaxAbsDiff(const std::vector<PartDescriptor>& a, const std::vector<PartDescriptor>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t c = 0; c < a[i].values.size(); ++c) {
      m = std::max(m, std::abs(static_cast<double>(a[i].values[c]) - b[i].values[c]));
    }
  }
  return m;
}

// Independent ring oracle for square maps: half-integer Chebyshev distance
// from the geometric center.
int RingOracle(int h, int w, int size, int n) {
  const double center = (size - 1) / 2.0;
  const int d = static_cast<int>(std::max(std::abs(h - center), std::abs(w - center)));
  const int m = (size + 1) / 2;
  for (int i = 1; i <= n; ++i) {
    if ((i - 1) * m / n <= d && d < i * m / n) return i;
  }
  return -1;
}

TEST(PartitionSpecTest, ParseAndPrint) {
  EXPECT_EQ(PartitionSpec::Parse("square_ring:4"), (PartitionSpec{PartitionStrategy::kSquareRing, 4}));
  EXPECT_EQ(PartitionSpec::Parse("row:2"), (PartitionSpec{PartitionStrategy::kRow, 2}));
  EXPECT_EQ(PartitionSpec::Parse("col:3").strategy, PartitionStrategy::kColumn);
  EXPECT_EQ(PartitionSpec::Parse(PartitionSpec{PartitionStrategy::kColumn, 5}.ToString()),
            (PartitionSpec{PartitionStrategy::kColumn, 5}));
  EXPECT_THROW(PartitionSpec::Parse("spiral:4"), ConfigError);
  EXPECT_THROW(PartitionSpec::Parse("row:x"), ConfigError);
}

TEST(PartitionSpecTest, BoundsNameTheViolation) {
  EXPECT_EQ((PartitionSpec{PartitionStrategy::kSquareRing, 1}).MaxParts(16, 15), 8);
  EXPECT_EQ((PartitionSpec{PartitionStrategy::kRow, 1}).MaxParts(16, 15), 16);
  EXPECT_EQ((PartitionSpec{PartitionStrategy::kColumn, 1}).MaxParts(16, 15), 15);
  try {
    BuildAssignment({PartitionStrategy::kSquareRing, 9}, 16, 16);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("8"), std::string::npos) << e.what();
  }
  EXPECT_THROW(BuildAssignment({PartitionStrategy::kRow, 0}, 16, 16), ConfigError);
  EXPECT_THROW(BuildAssignment({PartitionStrategy::kColumn, 17}, 16, 16), ConfigError);
}

TEST(BuildAssignmentTest, SweepIsDisjointCover) {
  const int sizes[] = {8, 15, 16, 17, 32};
  for (auto strategy :
       {PartitionStrategy::kSquareRing, PartitionStrategy::kRow, PartitionStrategy::kColumn}) {
    for (int n = 1; n <= 8; ++n) {
      for (int h : sizes) {
        for (int w : sizes) {
          const PartitionSpec spec{strategy, n};
          if (n > spec.MaxParts(h, w)) {
            EXPECT_THROW(BuildAssignment(spec, h, w), ConfigError);
            continue;
          }
          const PartAssignment a = BuildAssignment(spec, h, w);
          std::vector<int> counts(n, 0);
          for (int v : a.grid()) {
            ASSERT_GE(v, 1);
            ASSERT_LE(v, n);
            ++counts[v - 1];
          }
          EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), 0), h * w);
          for (int i = 0; i < n; ++i) {
            EXPECT_GT(counts[i], 0);
            EXPECT_EQ(counts[i], a.cell_count(i + 1));
          }
        }
      }
    }
  }
}

TEST(BuildAssignmentTest, SquareRingCountsMatchEnumeration) {
  const PartAssignment a = BuildAssignment({PartitionStrategy::kSquareRing, 4}, 16, 16);
  EXPECT_EQ(std::vector<int>(a.cell_counts().begin(), a.cell_counts().end()),
            (std::vector<int>{16, 48, 80, 112}));
  for (int size : {8, 15, 16, 17, 32}) {
    for (int n = 1; n <= (size + 1) / 2; ++n) {
      const PartAssignment b = BuildAssignment({PartitionStrategy::kSquareRing, n}, size, size);
      for (int h = 0; h < size; ++h) {
        for (int w = 0; w < size; ++w) {
          ASSERT_EQ(b.part(h, w), RingOracle(h, w, size, n)) << size << " n=" << n;
        }
      }
    }
  }
}

TEST(BuildAssignmentTest, SinglePartAndRowBands) {
  const PartAssignment one = BuildAssignment({PartitionStrategy::kSquareRing, 1}, 16, 16);
  EXPECT_EQ(one.cell_count(1), 256);
  const PartAssignment rows = BuildAssignment({PartitionStrategy::kRow, 4}, 16, 16);
  for (int i = 1; i <= 4; ++i) EXPECT_EQ(rows.cell_count(i), 64);
  for (int h = 0; h < 16; ++h) EXPECT_EQ(rows.part(h, 5), h / 4 + 1);
  const PartAssignment cols = BuildAssignment({PartitionStrategy::kColumn, 3}, 4, 10);
  // floor rule: bands [0,3), [3,6), [6,10)
  EXPECT_EQ(cols.cell_count(1), 12);
  EXPECT_EQ(cols.cell_count(3), 16);
}

TEST(BuildAssignmentTest, RingIndexGrowsWithDistance) {
  for (int size : {15, 16}) {
    const PartAssignment a = BuildAssignment({PartitionStrategy::kSquareRing, 4}, size, size);
    const double center = (size - 1) / 2.0;
    for (int h1 = 0; h1 < size; ++h1) {
      for (int w1 = 0; w1 < size; ++w1) {
        const double d1 = std::max(std::abs(h1 - center), std::abs(w1 - center));
        const double d2 = std::max(std::abs(0 - center), std::abs(w1 - center));
        if (d2 >= d1) {
          EXPECT_GE(a.part(0, w1), a.part(h1, w1));
        }
      }
    }
  }
}

TEST(BuildAssignmentTest, TextRoundTrip) {
  const PartAssignment a = BuildAssignment({PartitionStrategy::kSquareRing, 3}, 15, 17);
  std::stringstream ss;
  a.WriteText(ss);
  EXPECT_EQ(PartAssignment::ReadText(ss), a);
  std::istringstream bad("1 2\n1\n");
  EXPECT_THROW(PartAssignment::ReadText(bad), DataError);
}

TEST(PartitionPoolTest, WorkedExample4x4) {
  FeatureMap f(4, 4, 1);
  for (int h = 0; h < 4; ++h) {
    for (int w = 0; w < 4; ++w) f.at(h, w, 0) = static_cast<float>(h * 4 + w);
  }
  const PartAssignment a = BuildAssignment({PartitionStrategy::kSquareRing, 2}, 4, 4);
  EXPECT_EQ(a.part(1, 1), 1);
  EXPECT_EQ(a.part(1, 2), 1);
  EXPECT_EQ(a.part(2, 1), 1);
  EXPECT_EQ(a.part(2, 2), 1);
  EXPECT_EQ(a.cell_count(1), 4);
  const auto parts = PartitionPool(f, a);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].part_index, 1);
  EXPECT_FLOAT_EQ(parts[0].values[0], 7.5f);
  EXPECT_FLOAT_EQ(parts[1].values[0], 7.5f);
}

TEST(PartitionPoolTest, ConstantMapAndTotalAverage) {
  FeatureMap constant(16, 16, 5, 2.25f);
  for (const auto& p : PartitionPool(constant, BuildAssignment({PartitionStrategy::kRow, 3}, 16, 16))) {
    for (float v : p.values) EXPECT_FLOAT_EQ(v, 2.25f);
  }
  std::mt19937_64 rng(1);
  const auto f = RandomMap<double>(16, 16, 8, rng);
  const PartAssignment a = BuildAssignment({PartitionStrategy::kSquareRing, 4}, 16, 16);
  const auto parts = PartitionPool(f, a);
  for (int c = 0; c < 8; ++c) {
    double global = 0.0;
    for (int h = 0; h < 16; ++h) {
      for (int w = 0; w < 16; ++w) global += f.at(h, w, c);
    }
    global /= 256.0;
    double weighted = 0.0;
    for (int i = 0; i < 4; ++i) weighted += parts[i].values[c] * a.cell_count(i + 1) / 256.0;
    EXPECT_NEAR(weighted, global, 1e-12);
  }
}

TEST(PartitionPoolTest, SinglePartIsGlobalAverageExactly) {
  std::mt19937_64 rng(2);
  const auto f = RandomMap<float>(15, 17, 3, rng);
  for (auto strategy :
       {PartitionStrategy::kSquareRing, PartitionStrategy::kRow, PartitionStrategy::kColumn}) {
    const auto parts = PartitionPool(f, BuildAssignment({strategy, 1}, 15, 17));
    for (int c = 0; c < 3; ++c) {
      float sum = 0.0f;
      for (int h = 0; h < 15; ++h) {
        for (int w = 0; w < 17; ++w) sum += f.at(h, w, c);
      }
      // Same summation order as a plain global average.
      EXPECT_NEAR(parts[0].values[c], sum / 255.0f, 1e-6);
    }
  }
}

TEST(PartitionPoolTest, ShapeMismatchThrows) {
  const FeatureMap f(8, 8, 2);
  EXPECT_THROW(PartitionPool(f, BuildAssignment({PartitionStrategy::kRow, 2}, 16, 16)),
               ConfigError);
  std::vector<float> out(3);
  std::vector<float> chw(8 * 8 * 2);
  EXPECT_THROW(PoolParts<float>(chw, 2, BuildAssignment({PartitionStrategy::kRow, 2}, 8, 8), out),
               ConfigError);
}

TEST(PartitionPoolTest, DihedralInvariance) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int size = trial % 2 ? 16 : 15;
    const int n = 1 + trial % ((size + 1) / 2);
    const PartAssignment a = BuildAssignment({PartitionStrategy::kSquareRing, n}, size, size);
    const FeatureMap f = RandomMap<float>(size, size, 4, rng);
    const auto base = PartitionPool(f, a);
    const int s = size - 1;
    using P = std::pair<int, int>;
    const FeatureMap variants[] = {
        Remap(f, [&](int h, int w) { return P{w, s - h}; }),
        Remap(f, [&](int h, int w) { return P{s - h, s - w}; }),
        Remap(f, [&](int h, int w) { return P{s - w, h}; }),
        Remap(f, [&](int h, int w) { return P{h, s - w}; }),
        Remap(f, [&](int h, int w) { return P{s - h, w}; }),
        Remap(f, [&](int h, int w) { return P{w, h}; }),
        Remap(f, [&](int h, int w) { return P{s - w, s - h}; }),
    };
    for (const auto& v : variants) worst = std::max(worst, MaxAbsDiff(base, PartitionPool(v, a)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(PartitionPoolTest, RowInvariantToColumnPermutations) {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const FeatureMap f = RandomMap<float>(8, 32, 3, rng);
    const PartAssignment rows = BuildAssignment({PartitionStrategy::kRow, 1 + trial % 8}, 8, 32);
    const int shift = std::uniform_int_distribution<int>(0, 31)(rng);
    const FeatureMap shifted = Remap(f, [&](int h, int w) { return std::pair{h, (w + shift) % 32}; });
    worst = std::max(worst, MaxAbsDiff(PartitionPool(f, rows), PartitionPool(shifted, rows)));
    std::vector<int> perm(32);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const FeatureMap permuted = Remap(f, [&](int h, int w) { return std::pair{h, perm[w]}; });
    worst = std::max(worst, MaxAbsDiff(PartitionPool(f, rows), PartitionPool(permuted, rows)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(PartitionPoolTest, ColumnInvariantToRowPermutations) {
  std::mt19937_64 rng(5);
  const FeatureMap f = RandomMap<float>(17, 8, 3, rng);
  const PartAssignment cols = BuildAssignment({PartitionStrategy::kColumn, 4}, 17, 8);
  std::vector<int> perm(17);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const FeatureMap permuted = Remap(f, [&](int h, int w) { return std::pair{perm[h], w}; });
  EXPECT_LT(MaxAbsDiff(PartitionPool(f, cols), PartitionPool(permuted, cols)), 1e-6);
}

TEST(PoolGradientTest, Examples) {
  const FeatureMap f(16, 16, 2);
  const auto g1 = PoolGradient(f, BuildAssignment({PartitionStrategy::kSquareRing, 1}, 16, 16),
                               {{1.0f, 1.0f}});
  for (float v : g1.data()) EXPECT_FLOAT_EQ(v, 1.0f / 256.0f);
  const PartAssignment a = BuildAssignment({PartitionStrategy::kSquareRing, 4}, 16, 16);
  const auto g4 = PoolGradient(f, a, {{1, 1}, {0, 0}, {0, 0}, {0, 0}});
  int nonzero = 0;
  for (int h = 0; h < 16; ++h) {
    for (int w = 0; w < 16; ++w) {
      const bool center = h >= 6 && h < 10 && w >= 6 && w < 10;
      EXPECT_FLOAT_EQ(g4.at(h, w, 0), center ? 1.0f / 16.0f : 0.0f);
      nonzero += g4.at(h, w, 1) != 0.0f;
    }
  }
  EXPECT_EQ(nonzero, 16);
  EXPECT_THROW(PoolGradient(f, a, {{1, 1}}), ConfigError);
}

TEST(PoolGradientTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int h = std::uniform_int_distribution<int>(2, 9)(rng);
    const int w = std::uniform_int_distribution<int>(2, 9)(rng);
    const auto strategy = static_cast<PartitionStrategy>(trial % 3);
    PartitionSpec spec{strategy, 1};
    spec.num_parts = std::uniform_int_distribution<int>(1, spec.MaxParts(h, w))(rng);
    const PartAssignment a = BuildAssignment(spec, h, w);
    const int c = 3;
    auto f = RandomMap<double>(h, w, c, rng);
    std::vector<std::vector<double>> up(spec.num_parts, std::vector<double>(c));
    for (auto& v : up) {
      for (double& x : v) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    }
    auto objective = [&](const BasicFeatureMap<double>& m) {
      double s = 0.0;
      const auto parts = PartitionPool(m, a);
      for (int i = 0; i < spec.num_parts; ++i) {
        for (int k = 0; k < c; ++k) s += parts[i].values[k] * up[i][k];
      }
      return s;
    };
    const auto grad = PoolGradient(f, a, up);
    const double step = 1e-3;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int k = 0; k < c; ++k) {
          const double saved = f.at(y, x, k);
          f.at(y, x, k) = saved + step;
          const double plus = objective(f);
          f.at(y, x, k) = saved - step;
          const double minus = objective(f);
          f.at(y, x, k) = saved;
          const double numeric = (plus - minus) / (2 * step);
          const double analytic = grad.at(y, x, k);
          worst = std::max(worst, std::abs(analytic - numeric) /
                                      std::max(1e-12, std::max(std::abs(analytic), std::abs(numeric))));
        }
      }
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(PoolPartsTest, FlatApiMatchesDescriptors) {
  std::mt19937_64 rng(7);
  const auto f = RandomMap<float>(6, 6, 3, rng);
  const PartAssignment a = BuildAssignment({PartitionStrategy::kSquareRing, 3}, 6, 6);
  std::vector<float> flat(9);
  PoolParts<float>(f.data(), 3, a, flat);
  const auto parts = PartitionPool(f, a);
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_EQ(flat[i * 3 + k], parts[i].values[k]);
  }
}

}  // namespace
}  // namespace lpn
