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
// Little-endian scalar I/O shared by the checkpoint and embedding formats.

#ifndef LPN_SRC_BINARY_IO_H_
#define LPN_SRC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

#include "lpn/errors.h"

namespace lpn::io {

static_assert(std::endian::native == std::endian::little,
              "checkpoint and embedding files are little-endian");

inline void WriteU32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
inline void WriteU64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

inline std::uint32_t ReadU32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw DataError("truncated file");
  return v;
}
inline std::uint64_t ReadU64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw DataError("truncated file");
  return v;
}

}  // namespace lpn::io

#endif  // LPN_SRC_BINARY_IO_H_
