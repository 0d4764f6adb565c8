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
// Helpers shared by the unit tests.

#ifndef LPN_TESTS_TEST_UTIL_H_
#define LPN_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "lpn/tensor.h"

namespace lpn::testing {

inline Tensor RandomTensor(std::vector<int> shape, std::mt19937_64& rng, float scale = 1.0f) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> dist(0.0f, scale);
  for (float& v : t.span()) v = dist(rng);
  return t;
}

inline double Dot(const Tensor& a, const Tensor& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<double>(a[i]) * b[i];
  return sum;
}

// Symmetric relative error with an absolute floor for near-zero gradients.
inline double RelativeError(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max(floor, std::abs(analytic) + std::abs(numeric));
}

// Fresh, empty directory under the system temp dir.
inline std::string TempDir(const std::string& name) {
  // Per process, so parallel ctest runs do not share directories.
  const auto dir = std::filesystem::temp_directory_path() /
                   ("lpn_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace lpn::testing

#endif  // LPN_TESTS_TEST_UTIL_H_
