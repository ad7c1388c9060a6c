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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clusterseg/geometry.hpp"
#include "clusterseg/grid.hpp"

namespace clusterseg::scenegen {

using geometry::CameraIntrinsics;
using geometry::Vec3;

// Unit quaternion, scalar first.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const noexcept;
  Vec3 rotate(const Vec3& v) const noexcept;
  Vec3 rotate_inverse(const Vec3& v) const noexcept;

  friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

enum class PrimitiveKind { kSphere, kBox };

const char* to_string(PrimitiveKind kind);
PrimitiveKind primitive_kind_from_string(const std::string& name);

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kSphere;
  Quaternion rotation;
  Vec3 translation{0.0, 0.0, 1.0};
  // For spheres all three entries hold the radius.
  Vec3 half_extents{0.1, 0.1, 0.1};
  Vec3 albedo{0.8, 0.8, 0.8};

  // Radius of a sphere enclosing the primitive.
  double bounding_radius() const noexcept;
  void validate() const;

  static Primitive sphere(const Vec3& center, double radius, const Vec3& albedo = {0.8, 0.8, 0.8});
  static Primitive box(const Vec3& center, const Vec3& half_extents,
                       const Quaternion& rotation = {}, const Vec3& albedo = {0.8, 0.8, 0.8});

  friend bool operator==(const Primitive&, const Primitive&) = default;
};

// Instance IDs are 1..K in list order.
struct Scene {
  std::vector<Primitive> objects;
  CameraIntrinsics camera;
  // Fronto-parallel background plane; nullopt renders an empty background.
  std::optional<double> background_depth;

  int object_count() const noexcept { return static_cast<int>(objects.size()); }
  void validate() const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

inline constexpr int kMaxObjects = 65534;
inline constexpr double kMinObjectDepth = 0.05;
inline constexpr int kSurfaceSamples = 4096;

struct GeneratorConfig {
  int width = 64;
  int height = 64;
  int min_objects = 2;
  int max_objects = 8;
  double min_half_extent = 0.08;
  double max_half_extent = 0.25;
  double min_depth = 1.0;
  double max_depth = 3.0;
  // Object centres project into the central `image_margin`..1-`image_margin`
  // fraction of the image.
  double image_margin = 0.1;
  double sphere_probability = 0.4;
  double min_feature_separation = 0.05;
  // Reject placements whose bounding spheres intersect.
  bool reject_interpenetration = true;
  int max_attempts = 1000;
  std::optional<double> background_depth;

  void validate() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct FrameBundle {
  Grid<double> rgb;        // H x W x 3 in [0, 1]
  Grid<double> depth;      // metres, 0 = no hit
  Grid<double> xyz;        // H x W x 3
  LabelMap instance_map;   // 0 = background, k = object k
  std::vector<Mask> amodal_masks;
  std::vector<double> occlusion_scores;

  int height() const noexcept { return depth.height(); }
  int width() const noexcept { return depth.width(); }
  int object_count() const noexcept { return static_cast<int>(amodal_masks.size()); }

  friend bool operator==(const FrameBundle&, const FrameBundle&) = default;
};

// Deterministic for a fixed seed. Throws kPlacementFailed when an object
// cannot be placed within cfg.max_attempts draws.
Scene sample_scene(std::uint64_t seed, const GeneratorConfig& cfg);

// Fixed deterministic surface sampling in the camera frame. Boxes include
// their 8 vertices and spheres their 6 axis extremes, so the bounds of the
// sample equal the bounds of the primitive.
geometry::PointCloud sample_surface(const Primitive& prim, int count = kSurfaceSamples);

// compute_object_feature over sample_surface.
geometry::ObjectFeature primitive_feature(const Primitive& prim);

struct RayHit {
  double depth = 0.0;  // z of the hit point (ray direction has unit z)
  Vec3 normal{0.0, 0.0, -1.0};
};

// Intersects the camera ray through (col, row) with a primitive. Returns the
// nearest hit with positive depth.
std::optional<RayHit> intersect(const Primitive& prim, const CameraIntrinsics& camera,
                                double col, double row) noexcept;

// Ray-cast renderer, parallel over rows.
FrameBundle render(const Scene& scene);

// Reference renderer: per-object full-image passes followed by a z-buffer
// composite in instance order. Bit-identical to render().
FrameBundle render_serial(const Scene& scene);

// |modal| / |amodal|; 0 when amodal is empty. Throws kNotSubset when modal
// is not contained in amodal, kDimensionMismatch on shape mismatch.
double occlusion_score(const Mask& modal, const Mask& amodal);

// Pixels of instance_map equal to label.
Mask modal_mask(const LabelMap& instance_map, int label);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

}  // namespace clusterseg::scenegen
