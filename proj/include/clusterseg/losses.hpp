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
#include <functional>
#include <string>

#include "clusterseg/annotation.hpp"
#include "clusterseg/grid.hpp"

namespace clusterseg::losses {

using annotation::Annotation;

// Model outputs before the probability transform: two-channel logits
// (background, foreground) for the centroid and mask heads. The same layout
// carries loss gradients.
struct RawPrediction {
  Grid<double> xi_hat;       // H x W x 9
  Grid<double> b_hat;        // H x W
  Grid<double> eta_logits;   // H x W x 2
  Grid<double> mask_logits;  // H x W x 2

  int height() const noexcept { return b_hat.height(); }
  int width() const noexcept { return b_hat.width(); }

  static RawPrediction zeros(int height, int width);
  void check_shape(int height, int width) const;

  friend bool operator==(const RawPrediction&, const RawPrediction&) = default;
};

struct LossWeights {
  double lambda_s = 1.0;
  double lambda_cen = 1.0;
  double lambda_var = 1.0;
  double lambda_vio = 1.0;
  double lambda_xi = 1.0;
  double lambda_b = 10.0;
  double lambda_p = 100.0;  // multiplies the whole pixel-wise term
  double lambda_v = 0.2;    // violation radius as a fraction of B

  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
  double l_s = 0.0;
  double l_cen = 0.0;
  double l_p = 0.0;  // already scaled by lambda_p, lambda_xi and lambda_b
  double l_var = 0.0;
  double l_vio = 0.0;
  double total = 0.0;
  RawPrediction gradient;
};

// Mean softmax cross-entropy over all pixels. Writes d/dlogits into `grad`
// (overwriting) when non-null.
double semantic_mask_loss(const Grid<double>& mask_logits, const Mask& fg_gt,
                          Grid<double>* grad = nullptr);

// Softmax cross-entropy against eta_gt averaged over ground-truth
// foreground pixels; 0 without foreground.
double center_loss(const Grid<double>& eta_logits, const Mask& eta_gt, const Mask& fg_gt,
                   Grid<double>* grad = nullptr);

// lambda_xi * mean_fg |xi_hat - xi|^2 + lambda_b * mean_fg (b_hat - b)^2.
double pixel_loss(const Grid<double>& xi_hat, const Grid<double>& b_hat, const Annotation& ann,
                  double lambda_xi, double lambda_b, Grid<double>* grad_xi = nullptr,
                  Grid<double>* grad_b = nullptr);

// sum_k (1/N_k) sum_{p in O_k} |xi_hat_p - mean_k|^2 over ground-truth
// instances.
double variance_loss(const Grid<double>& xi_hat, const LabelMap& instance_map,
                     Grid<double>* grad = nullptr);

// Sum over foreground pixels of |xi_hat - xi| where it exceeds
// lambda_v * B. The indicator carries no gradient.
double violation_loss(const Grid<double>& xi_hat, const Annotation& ann, double lambda_v,
                      Grid<double>* grad = nullptr);

LossBreakdown total_loss(const RawPrediction& pred, const Annotation& ann,
                         const LabelMap& instance_map, const LossWeights& weights);

struct GradCheckOptions {
  double epsilon = 1e-5;
  int samples = 500;
  std::uint64_t seed = 0;
  // Applied to the analytic gradient before comparison; negative controls.
  std::function<void(RawPrediction&)> corrupt_gradient;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped_near_threshold = 0;
  // Coordinates checked per head and per active term.
  int mask_coords = 0;
  int eta_coords = 0;
  int b_coords = 0;
  int xi_coords = 0;
  int xi_foreground_coords = 0;
  int xi_violating_coords = 0;
  std::string worst;  // description of the worst coordinate
};

// Central differences on randomly chosen coordinates against the analytic
// gradient of total_loss. Coordinates within 10 epsilon of the violation
// threshold are skipped and replaced. Relative error is
// |analytic - numeric| / max(1e-8, |numeric|).
GradCheckReport finite_diff_check(const RawPrediction& pred, const Annotation& ann,
                                  const LabelMap& instance_map, const LossWeights& weights,
                                  const GradCheckOptions& options = {});

}  // namespace clusterseg::losses
