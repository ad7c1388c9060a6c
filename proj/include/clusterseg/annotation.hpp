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

#include <span>
#include <vector>

#include "clusterseg/geometry.hpp"
#include "clusterseg/grid.hpp"
#include "clusterseg/scenegen.hpp"

namespace clusterseg::annotation {

using geometry::ObjectFeature;

inline constexpr double kMinCandidateFraction = 0.10;
inline constexpr double kMaxCandidateFraction = 0.30;

struct AnnotationConfig {
  double candidate_fraction = 0.20;
  // Enclosing radius when only one object is visible (the minimum over
  // other objects is empty).
  double single_object_radius = 1.0;
};

// Per-pixel ground truth for one frame. Background pixels are zero in every
// map.
struct Annotation {
  Grid<double> xi_map;   // H x W x 9
  Mask eta_gt;           // centroid candidates
  Grid<double> b_map;    // enclosing radius
  Mask fg_mask;
  std::vector<ObjectFeature> per_object_xi;  // index k-1 for instance k

  int height() const noexcept { return fg_mask.height(); }
  int width() const noexcept { return fg_mask.width(); }

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct XiMap {
  Grid<double> xi_map;
  std::vector<ObjectFeature> per_object_xi;
};

// Each object's feature comes from its full surface sample, so every pixel
// of an instance carries the same value regardless of occlusion.
XiMap make_xi_map(const scenegen::Scene& scene, const scenegen::FrameBundle& frame);

// Per object, marks the max(1, round(fraction * N)) modal pixels nearest to
// the mean pixel coordinate (ties by row, then column). Throws
// kInvalidArgument when fraction lies outside [0.10, 0.30].
Mask make_centroid_candidates(const LabelMap& instance_map, double fraction);

// Half the minimum feature distance from each visible object to every other
// visible object; single_object_radius when only one object is visible.
Grid<double> make_bgt_map(std::span<const ObjectFeature> per_object_xi,
                          const LabelMap& instance_map, double single_object_radius = 1.0);

Annotation annotate(const scenegen::Scene& scene, const scenegen::FrameBundle& frame,
                    const AnnotationConfig& cfg = {});

// Smallest B^gt over foreground pixels; 0 for an empty foreground.
double min_foreground_radius(const Annotation& ann);

}  // namespace clusterseg::annotation
