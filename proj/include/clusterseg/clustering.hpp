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

#include <vector>

#include "clusterseg/grid.hpp"

namespace clusterseg::clustering {

// Per-pixel model outputs in probability space.
struct Prediction {
  Grid<double> xi_hat;     // H x W x 9
  Grid<double> eta_hat;    // centroid probability in [0, 1]
  Grid<double> b_hat;      // enclosing radius >= 0
  Grid<double> mask_prob;  // foreground probability in [0, 1]

  int height() const noexcept { return mask_prob.height(); }
  int width() const noexcept { return mask_prob.width(); }

  static Prediction zeros(int height, int width);

  // Throws kShapeMismatch / kNonFinite / kInvalidArgument on violations.
  void validate() const;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct Segmentation {
  LabelMap labels;             // 0 = background, 1..M
  std::vector<double> scores;  // mean eta_hat per instance
  std::vector<Pixel> seeds;

  int instance_count() const noexcept { return static_cast<int>(scores.size()); }

  friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

struct RefineStats {
  int covariance_fallbacks = 0;
  int reassigned_pixels = 0;
  int dropped_instances = 0;
};

inline constexpr double kDefaultForegroundThreshold = 0.5;
inline constexpr double kCovarianceRegularization = 1e-6;

// Greedy sphere seeding: repeatedly take the unassigned foreground pixel with
// the highest eta_hat (ties by row, then column) and absorb every unassigned
// foreground pixel whose feature lies in the closed ball of radius b_hat
// around the seed's feature.
Segmentation seed_segmentation(const Prediction& pred,
                               double fg_threshold = kDefaultForegroundThreshold);

// One hard-assignment E-step of a Gaussian mixture initialised from `seg`:
// component m has the mean and (population) covariance of its pixels'
// features plus 1e-6 I, and weight N_m / N_fg. Empty instances are dropped
// and labels recompacted in their original order.
Segmentation gmm_refine(const Segmentation& seg, const Prediction& pred,
                        RefineStats* stats = nullptr);

// Single-threaded reference for gmm_refine.
Segmentation gmm_refine_serial(const Segmentation& seg, const Prediction& pred,
                               RefineStats* stats = nullptr);

// seed_segmentation followed by gmm_refine.
Segmentation segment(const Prediction& pred, double fg_threshold = kDefaultForegroundThreshold,
                     RefineStats* stats = nullptr);

}  // namespace clusterseg::clustering
