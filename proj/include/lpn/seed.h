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
#ifndef LPN_SEED_H_
#define LPN_SEED_H_

#include <cstdint>

namespace lpn {

// splitmix64 finalizer.
inline std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (root, stream, a, b). The derivation is part
// of the reproducibility contract: changing it changes every run.
inline std::uint64_t DeriveSeed(std::uint64_t root, std::uint64_t stream, std::uint64_t a = 0,
                                std::uint64_t b = 0) {
  return MixSeed(MixSeed(MixSeed(MixSeed(root) ^ stream) ^ a) ^ b);
}

// Stream ids.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kTrainStream = 2;

}  // namespace lpn

#endif  // LPN_SEED_H_
