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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clusterseg/geometry.hpp"
#include "clusterseg/rng.hpp"
#include "doctest.h"

using namespace clusterseg;
using namespace clusterseg::geometry;

namespace {

CameraIntrinsics camera(double f, double pp, int size) {
  CameraIntrinsics c;
  c.fx = c.fy = f;
  c.ppx = c.ppy = pp;
  c.width = c.height = size;
  return c;
}

PointCloud random_cloud(std::uint64_t seed, int n) {
  CounterRng rng(seed);
  PointCloud pc(n);
  for (auto& p : pc) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 3)};
  return pc;
}

void check_feature(const ObjectFeature& xi, std::array<double, 9> expected) {
  for (int i = 0; i < 9; ++i) CHECK(xi[i] == doctest::Approx(expected[i]).epsilon(1e-14));
}

}  // namespace

TEST_CASE("principal point projects onto the optical axis") {
  Grid<double> depth(101, 101);
  depth(50, 50) = 2.0;
  const auto xyz = depth_to_xyz(depth, camera(100, 50, 101));
  CHECK(xyz(50, 50, 0) == 0.0);
  CHECK(xyz(50, 50, 1) == 0.0);
  CHECK(xyz(50, 50, 2) == 2.0);
}

TEST_CASE("pixel (150, 50) at unit depth back-projects to (1, 0, 1)") {
  CameraIntrinsics c = camera(100, 50, 200);
  Grid<double> depth(200, 200);
  depth(50, 150) = 1.0;  // row 50, column 150
  const auto xyz = depth_to_xyz(depth, c);
  CHECK(xyz(50, 150, 0) == 1.0);
  CHECK(xyz(50, 150, 1) == 0.0);
  CHECK(xyz(50, 150, 2) == 1.0);
}

TEST_CASE("zero depth maps to the origin") {
  Grid<double> depth(4, 4);
  depth(1, 2) = 0.0;
  depth(0, 0) = -1.0;
  const auto xyz = depth_to_xyz(depth, camera(10, 2, 4));
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(xyz(1, 2, ch) == 0.0);
    CHECK(xyz(0, 0, ch) == 0.0);
  }
}

TEST_CASE("depth map and intrinsics must agree in size") {
  Grid<double> depth(4, 5);
  try {
    depth_to_xyz(depth, camera(10, 2, 4));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
  CameraIntrinsics bad = camera(0, 2, 4);
  CHECK_THROWS_AS(depth_to_xyz(Grid<double>(4, 4), bad), Error);
}

TEST_CASE("depth_to_xyz reproduces depth in channel 2 and matches the serial reference") {
  CounterRng rng(3);
  Grid<double> depth(37, 53);
  for (double& d : depth.values()) d = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.1, 5.0);
  CameraIntrinsics c;
  c.fx = 61.5;
  c.fy = 58.25;
  c.ppx = 26.5;
  c.ppy = 18.0;
  c.width = 53;
  c.height = 37;
  const auto xyz = depth_to_xyz(depth, c);
  CHECK(xyz == depth_to_xyz_serial(depth, c));
  for (std::size_t p = 0; p < depth.pixel_count(); ++p) {
    if (depth.at(p) > 0) CHECK(xyz.at(p, 2) == depth.at(p));
  }
  // Independent check of the pinhole formula on one pixel.
  const int r = 11, col = 40;
  if (depth(r, col) > 0) {
    CHECK(xyz(r, col, 0) == doctest::Approx((col - c.ppx) * depth(r, col) / c.fx));
    CHECK(xyz(r, col, 1) == doctest::Approx((r - c.ppy) * depth(r, col) / c.fy));
  }
}

TEST_CASE("object feature examples") {
  const PointCloud single{{1, 2, 3}};
  check_feature(compute_object_feature(single), {1, 2, 3, 1, 2, 3, 1, 2, 3});

  PointCloud cube;
  for (double x : {-0.5, 0.5})
    for (double y : {-0.5, 0.5})
      for (double z : {0.5, 1.5}) cube.push_back({x, y, z});
  check_feature(compute_object_feature(cube), {0, 0, 1, 0.25, 0.25, 1.25, 0, 0, 1});

  const PointCloud pair{{0, 0, 0}, {2, 0, 0}};
  check_feature(compute_object_feature(pair), {1, 0, 0, 2, 0, 0, 1, 0, 0});
}

TEST_CASE("object feature uses the bounds midpoint, not the mean") {
  // Mean x is 0.25, bounds midpoint is 0.5.
  const PointCloud pc{{0, 0, 1}, {0, 0, 1}, {0, 0, 1}, {1, 0, 1}};
  const auto xi = compute_object_feature(pc);
  CHECK(xi[0] == 0.5);
  // Population moment about the midpoint: mean of (x - 0.5)^2 = 0.25.
  CHECK(xi.moments()[0] == doctest::Approx(0.25));
}

TEST_CASE("object feature errors") {
  try {
    compute_object_feature(PointCloud{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyInput);
  }
  const PointCloud bad{{0, 0, 1}, {NAN, 0, 1}};
  try {
    compute_object_feature(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
  }
}

TEST_CASE("feature distance examples") {
  ObjectFeature a, b;
  CHECK(feature_distance(a, a) == 0.0);
  b[0] = 2.0;
  CHECK(feature_distance(a, b) == 2.0);
  ObjectFeature ones;
  ones.values.fill(1.0);
  CHECK(feature_distance(ones, a) == 3.0);
  CHECK(squared_distance(ones.values, a.values) == 9.0);
}

TEST_CASE("property: translation covariance of the object feature") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const PointCloud pc = random_cloud(seed, 1 + static_cast<int>(seed % 40));
    CounterRng rng(seed, 9);
    const Vec3 t{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    PointCloud moved = pc;
    for (auto& p : moved)
      for (int i = 0; i < 3; ++i) p[i] += t[i];
    const auto a = compute_object_feature(pc);
    const auto b = compute_object_feature(moved);
    for (int i = 0; i < 9; ++i) CHECK(b[i] - a[i] == doctest::Approx(t[i % 3]).epsilon(1e-9));
    const auto ma = a.moments();
    const auto mb = b.moments();
    for (int i = 0; i < 6; ++i) CHECK(mb[i] == doctest::Approx(ma[i]).epsilon(1e-9));
  }
}

TEST_CASE("property: permutation invariance and non-negative diagonal moments") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    PointCloud pc = random_cloud(seed, 2 + static_cast<int>(seed % 30));
    const auto a = compute_object_feature(pc);
    CounterRng rng(seed, 5);
    for (std::size_t i = pc.size(); i > 1; --i) std::swap(pc[i - 1], pc[rng.uniform_int(0, static_cast<int>(i) - 1)]);
    const auto b = compute_object_feature(pc);
    for (int i = 0; i < 9; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) CHECK(a[3 + i] - a[i] >= 0.0);
  }
}
