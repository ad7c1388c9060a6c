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

#include "clusterseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace clusterseg::geometry {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image size must be positive");
  }
  if (!std::isfinite(ppx) || !std::isfinite(ppy)) {
    throw Error(ErrorCode::kInvalidArgument, "principal point must be finite");
  }
}

CameraIntrinsics CameraIntrinsics::centered(int width, int height) {
  CameraIntrinsics intr;
  intr.fx = static_cast<double>(width);
  intr.fy = static_cast<double>(width);
  intr.ppx = 0.5 * width;
  intr.ppy = 0.5 * height;
  intr.width = width;
  intr.height = height;
  return intr;
}

std::array<double, 6> ObjectFeature::moments() const noexcept {
  return {values[3] - values[0], values[4] - values[1], values[5] - values[2],
          values[6] - values[0], values[7] - values[1], values[8] - values[2]};
}

namespace {

void check_depth_extent(const Grid<double>& depth, const CameraIntrinsics& intr) {
  intr.validate();
  if (depth.channels() != 1 || !depth.same_shape(intr.height, intr.width)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "depth map " + std::to_string(depth.height()) + "x" +
                    std::to_string(depth.width()) + " does not match intrinsics " +
                    std::to_string(intr.height) + "x" + std::to_string(intr.width));
  }
}

inline void back_project_row(const Grid<double>& depth, const CameraIntrinsics& intr,
                             int row, Grid<double>& xyz) {
  for (int col = 0; col < depth.width(); ++col) {
    const double d = depth(row, col);
    if (d > 0.0) {
      xyz(row, col, 0) = (col - intr.ppx) * d / intr.fx;
      xyz(row, col, 1) = (row - intr.ppy) * d / intr.fy;
      xyz(row, col, 2) = d;
    }
  }
}

}  // namespace

Grid<double> depth_to_xyz(const Grid<double>& depth, const CameraIntrinsics& intr) {
  check_depth_extent(depth, intr);
  Grid<double> xyz(depth.height(), depth.width(), 3, 0.0);
  const int rows = depth.height();
#pragma omp parallel for schedule(static)
  for (int row = 0; row < rows; ++row) {
    back_project_row(depth, intr, row, xyz);
  }
  return xyz;
}

Grid<double> depth_to_xyz_serial(const Grid<double>& depth, const CameraIntrinsics& intr) {
  check_depth_extent(depth, intr);
  Grid<double> xyz(depth.height(), depth.width(), 3, 0.0);
  for (int row = 0; row < depth.height(); ++row) {
    back_project_row(depth, intr, row, xyz);
  }
  return xyz;
}

ObjectFeature compute_object_feature(std::span<const Vec3> points) {
  if (points.empty()) {
    throw Error(ErrorCode::kEmptyInput, "object feature of an empty point cloud");
  }
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-lo[0], -lo[1], -lo[2]};
  for (const Vec3& p : points) {
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(p[a])) {
        throw Error(ErrorCode::kNonFinite, "point cloud contains a non-finite coordinate");
      }
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const Vec3 c{0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])};

  // xx, yy, zz, xy, yz, zx
  std::array<double, 6> sum{};
  for (const Vec3& p : points) {
    const double dx = p[0] - c[0];
    const double dy = p[1] - c[1];
    const double dz = p[2] - c[2];
    sum[0] += dx * dx;
    sum[1] += dy * dy;
    sum[2] += dz * dz;
    sum[3] += dx * dy;
    sum[4] += dy * dz;
    sum[5] += dz * dx;
  }
  const double n = static_cast<double>(points.size());

  ObjectFeature f;
  f[0] = c[0];
  f[1] = c[1];
  f[2] = c[2];
  f[3] = c[0] + sum[0] / n;
  f[4] = c[1] + sum[1] / n;
  f[5] = c[2] + sum[2] / n;
  f[6] = c[0] + sum[3] / n;
  f[7] = c[1] + sum[4] / n;
  f[8] = c[2] + sum[5] / n;
  return f;
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double feature_distance(std::span<const double> a, std::span<const double> b) noexcept {
  return std::sqrt(squared_distance(a, b));
}

double feature_distance(const ObjectFeature& a, const ObjectFeature& b) noexcept {
  return feature_distance(std::span<const double>(a.values), std::span<const double>(b.values));
}

}  // namespace clusterseg::geometry
