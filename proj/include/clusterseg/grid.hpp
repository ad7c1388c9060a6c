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

#include <cstddef>
#include <span>
#include <vector>

#include "clusterseg/error.hpp"

namespace clusterseg {

struct Pixel {
  int row = 0;
  int col = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// Dense row-major H x W x C image. Channel is the fastest-varying index.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 1) {
      throw Error(ErrorCode::kInvalidArgument, "grid dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int row, int col, int ch = 0) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  T& operator()(int row, int col, int ch = 0) noexcept { return data_[index(row, col, ch)]; }
  const T& operator()(int row, int col, int ch = 0) const noexcept {
    return data_[index(row, col, ch)];
  }

  // Flat pixel access (p = row * width + col).
  T& at(std::size_t p, int ch = 0) noexcept { return data_[p * channels_ + ch]; }
  const T& at(std::size_t p, int ch = 0) const noexcept { return data_[p * channels_ + ch]; }

  std::span<T> pixel(std::size_t p) noexcept {
    return std::span<T>(data_.data() + p * channels_, channels_);
  }
  std::span<const T> pixel(std::size_t p) const noexcept {
    return std::span<const T>(data_.data() + p * channels_, channels_);
  }

  bool same_shape(int height, int width) const noexcept {
    return height_ == height && width_ == width;
  }
  template <typename U>
  bool same_extent(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using Mask = Grid<unsigned char>;
using LabelMap = Grid<int>;

}  // namespace clusterseg
