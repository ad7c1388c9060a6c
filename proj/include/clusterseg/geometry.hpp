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

#include <array>
#include <span>
#include <vector>

#include "clusterseg/grid.hpp"

namespace clusterseg::geometry {

using Vec3 = std::array<double, 3>;
using PointCloud = std::vector<Vec3>;

// Pinhole camera without distortion. Pixel (u, v) = (col, row); the ray
// through integer pixel coordinates passes through the principal point at
// (ppx, ppy).
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double ppx = 0.0;
  double ppy = 0.0;
  int width = 0;
  int height = 0;

  // Throws kInvalidArgument unless fx, fy > 0 and width, height > 0.
  void validate() const;

  // Focal length equal to the image width, principal point at the centre.
  static CameraIntrinsics centered(int width, int height);

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

inline constexpr int kFeatureDim = 9;

// Object feature: bounding-box centre followed by the second moments added
// to the centre components,
//   (cx, cy, cz, cx+xx, cy+yy, cz+zz, cx+xy, cy+yz, cz+zx).
struct ObjectFeature {
  std::array<double, kFeatureDim> values{};

  double& operator[](int i) noexcept { return values[i]; }
  double operator[](int i) const noexcept { return values[i]; }

  Vec3 center() const noexcept { return {values[0], values[1], values[2]}; }
  // (xx, yy, zz, xy, yz, zx), i.e. the components with the centre removed.
  std::array<double, 6> moments() const noexcept;

  friend bool operator==(const ObjectFeature&, const ObjectFeature&) = default;
};

// Back-projects a metric depth map (0 = invalid) to an H x W x 3 XYZ map.
// Invalid pixels map to (0, 0, 0). Parallel over rows.
Grid<double> depth_to_xyz(const Grid<double>& depth, const CameraIntrinsics& intr);

// Single-threaded reference for depth_to_xyz.
Grid<double> depth_to_xyz_serial(const Grid<double>& depth, const CameraIntrinsics& intr);

// Axis-aligned bounds midpoint plus population second moments about it.
// Throws kEmptyInput for an empty cloud, kNonFinite for non-finite points.
ObjectFeature compute_object_feature(std::span<const Vec3> points);

double feature_distance(const ObjectFeature& a, const ObjectFeature& b) noexcept;
double feature_distance(std::span<const double> a, std::span<const double> b) noexcept;
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace clusterseg::geometry
