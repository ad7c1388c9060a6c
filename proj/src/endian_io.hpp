// Copyright 2026 The ClusterSeg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian scalar encoding shared by the bundle and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace clusterseg::detail {

template <typename U>
void put_le(std::ostream& os, U value) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

inline void put_f64(std::ostream& os, double value) {
  put_le(os, std::bit_cast<std::uint64_t>(value));
}

template <typename U>
U decode_le(const unsigned char* bytes) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

// Returns false on a short read.
template <typename U>
bool get_le(std::istream& is, U& value) {
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) return false;
  value = decode_le<U>(buf);
  return true;
}

inline bool get_f64(std::istream& is, double& value) {
  std::uint64_t bits = 0;
  if (!get_le(is, bits)) return false;
  value = std::bit_cast<double>(bits);
  return true;
}

}  // namespace clusterseg::detail
