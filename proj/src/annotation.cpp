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

#include "clusterseg/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace clusterseg::annotation {

namespace {

int max_label(const LabelMap& instance_map) {
  int m = 0;
  for (int v : instance_map.values()) m = std::max(m, v);
  return m;
}

std::vector<std::vector<std::size_t>> pixels_by_label(const LabelMap& instance_map, int labels) {
  std::vector<std::vector<std::size_t>> groups(labels + 1);
  for (std::size_t p = 0; p < instance_map.pixel_count(); ++p) {
    const int k = instance_map.at(p);
    if (k > 0) groups[k].push_back(p);
  }
  return groups;
}

}  // namespace

XiMap make_xi_map(const scenegen::Scene& scene, const scenegen::FrameBundle& frame) {
  const LabelMap& labels = frame.instance_map;
  if (max_label(labels) > scene.object_count()) {
    throw Error(ErrorCode::kInvalidArgument, "instance map label exceeds object count");
  }
  XiMap out;
  out.per_object_xi.reserve(scene.objects.size());
  for (const auto& prim : scene.objects) out.per_object_xi.push_back(scenegen::primitive_feature(prim));

  out.xi_map = Grid<double>(labels.height(), labels.width(), geometry::kFeatureDim, 0.0);
  for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
    const int k = labels.at(p);
    if (k == 0) continue;
    const auto& xi = out.per_object_xi[k - 1];
    std::copy(xi.values.begin(), xi.values.end(), out.xi_map.pixel(p).begin());
  }
  return out;
}

Mask make_centroid_candidates(const LabelMap& instance_map, double fraction) {
  if (!(fraction >= kMinCandidateFraction && fraction <= kMaxCandidateFraction)) {
    throw Error(ErrorCode::kInvalidArgument,
                "candidate fraction " + std::to_string(fraction) + " outside [0.10, 0.30]");
  }
  const int labels = max_label(instance_map);
  const auto groups = pixels_by_label(instance_map, labels);
  const int width = instance_map.width();

  Mask eta(instance_map.height(), width, 1, 0);
  for (int k = 1; k <= labels; ++k) {
    const auto& pixels = groups[k];
    if (pixels.empty()) continue;
    double mean_row = 0.0;
    double mean_col = 0.0;
    for (std::size_t p : pixels) {
      mean_row += static_cast<double>(p / width);
      mean_col += static_cast<double>(p % width);
    }
    mean_row /= static_cast<double>(pixels.size());
    mean_col /= static_cast<double>(pixels.size());

    struct Ranked {
      double dist2;
      std::size_t pixel;  // row-major, so pixel order is (row, col) order
    };
    std::vector<Ranked> ranked;
    ranked.reserve(pixels.size());
    for (std::size_t p : pixels) {
      const double dr = static_cast<double>(p / width) - mean_row;
      const double dc = static_cast<double>(p % width) - mean_col;
      ranked.push_back({dr * dr + dc * dc, p});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      return a.dist2 != b.dist2 ? a.dist2 < b.dist2 : a.pixel < b.pixel;
    });
    const auto n = static_cast<std::size_t>(
        std::max(1L, std::lround(fraction * static_cast<double>(pixels.size()))));
    for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) eta.at(ranked[i].pixel) = 1;
  }
  return eta;
}

Grid<double> make_bgt_map(std::span<const ObjectFeature> per_object_xi,
                          const LabelMap& instance_map, double single_object_radius) {
  const int labels = max_label(instance_map);
  if (labels > static_cast<int>(per_object_xi.size())) {
    throw Error(ErrorCode::kInvalidArgument, "instance map label exceeds object count");
  }
  std::vector<bool> visible(labels + 1, false);
  for (int v : instance_map.values()) visible[v] = true;

  std::vector<double> radius(labels + 1, 0.0);
  for (int k = 1; k <= labels; ++k) {
    if (!visible[k]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int l = 1; l <= labels; ++l) {
      if (l == k || !visible[l]) continue;
      best = std::min(best, geometry::feature_distance(per_object_xi[k - 1], per_object_xi[l - 1]));
    }
    radius[k] = std::isfinite(best) ? 0.5 * best : single_object_radius;
  }

  Grid<double> b(instance_map.height(), instance_map.width(), 1, 0.0);
  for (std::size_t p = 0; p < instance_map.pixel_count(); ++p) {
    const int k = instance_map.at(p);
    if (k > 0) b.at(p) = radius[k];
  }
  return b;
}

Annotation annotate(const scenegen::Scene& scene, const scenegen::FrameBundle& frame,
                    const AnnotationConfig& cfg) {
  XiMap xi = make_xi_map(scene, frame);
  Annotation ann;
  ann.eta_gt = make_centroid_candidates(frame.instance_map, cfg.candidate_fraction);
  ann.b_map = make_bgt_map(xi.per_object_xi, frame.instance_map, cfg.single_object_radius);
  ann.fg_mask = Mask(frame.instance_map.height(), frame.instance_map.width(), 1, 0);
  for (std::size_t p = 0; p < frame.instance_map.pixel_count(); ++p) {
    ann.fg_mask.at(p) = frame.instance_map.at(p) > 0 ? 1 : 0;
  }
  ann.xi_map = std::move(xi.xi_map);
  ann.per_object_xi = std::move(xi.per_object_xi);
  return ann;
}

double min_foreground_radius(const Annotation& ann) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < ann.fg_mask.pixel_count(); ++p) {
    if (ann.fg_mask.at(p)) best = std::min(best, ann.b_map.at(p));
  }
  return std::isfinite(best) ? best : 0.0;
}

}  // namespace clusterseg::annotation
