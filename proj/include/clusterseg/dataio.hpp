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

// Tensor bundles (.tsb): "TSB1", u64 little-endian manifest length, UTF-8
// JSON manifest, then one payload blob. The manifest maps each tensor name
// to {dtype, shape, offset, length, layout, endianness}; offsets are
// relative to the start of the payload and tensors are stored back to back
// in manifest order.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clusterseg/annotation.hpp"
#include "clusterseg/clustering.hpp"
#include "clusterseg/grid.hpp"
#include "clusterseg/scenegen.hpp"

namespace clusterseg::dataio {

enum class DType { kF32, kF64, kU8, kU16 };

std::size_t dtype_size(DType dtype) noexcept;
const char* to_string(DType dtype) noexcept;
// Throws kUnsupportedDtype.
DType dtype_from_string(std::string_view name);

template <typename T>
struct DTypeOf;
template <>
struct DTypeOf<float> {
  static constexpr DType value = DType::kF32;
};
template <>
struct DTypeOf<double> {
  static constexpr DType value = DType::kF64;
};
template <>
struct DTypeOf<std::uint8_t> {
  static constexpr DType value = DType::kU8;
};
template <>
struct DTypeOf<std::uint16_t> {
  static constexpr DType value = DType::kU16;
};

// Raw little-endian element bytes plus dtype and shape.
struct Tensor {
  DType dtype = DType::kU8;
  std::vector<std::uint64_t> shape;
  std::vector<unsigned char> bytes;

  std::uint64_t element_count() const noexcept;

  template <typename T>
  static Tensor from(std::span<const T> values, std::vector<std::uint64_t> shape);
  template <typename T>
  std::vector<T> as() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Manifest order is preserved on both write and read.
using TensorBundle = std::vector<NamedTensor>;

// Throws kDataMismatch when absent.
const Tensor& find(const TensorBundle& bundle, std::string_view name);
bool contains(const TensorBundle& bundle, std::string_view name);

std::string encode_bundle(const TensorBundle& bundle);
TensorBundle decode_bundle(std::string_view bytes);

void write_bundle(const std::string& path, const TensorBundle& bundle);
TensorBundle read_bundle(const std::string& path);

// Frame + annotation layout used by the dataset files.
TensorBundle frame_to_bundle(const scenegen::FrameBundle& frame, const annotation::Annotation& ann);
std::pair<scenegen::FrameBundle, annotation::Annotation> frame_from_bundle(const TensorBundle& bundle);

TensorBundle segmentation_to_bundle(const clustering::Segmentation& seg);
clustering::Segmentation segmentation_from_bundle(const TensorBundle& bundle);

std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view text);

}  // namespace clusterseg::dataio
