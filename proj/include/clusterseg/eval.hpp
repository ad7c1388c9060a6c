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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clusterseg/clustering.hpp"
#include "clusterseg/grid.hpp"

namespace clusterseg::eval {

// Half-open [lo, hi) unless hi_inclusive.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool hi_inclusive = false;

  bool contains(double v) const noexcept { return v >= lo && (hi_inclusive ? v <= hi : v < hi); }
};

struct EvalConfig {
  std::vector<double> iou_thresholds;  // 0.50, 0.55, ..., 0.95
  std::array<Range, 3> size_bins;      // small, medium, large (bbox px^2)
  std::array<Range, 3> occlusion_bins; // heavy, medium, little
  std::array<int, 3> max_dets{1, 10, 100};

  EvalConfig();
  void validate() const;
};

// Index of the occlusion bin holding `score` (0 heavy, 1 medium, 2 little),
// or -1 outside [0, 1].
int occlusion_bin(double score, const EvalConfig& cfg = {});

struct EvalResult {
  double ap = 0.0, ap50 = 0.0, ap75 = 0.0;
  double ap_s = 0.0, ap_m = 0.0, ap_l = 0.0;
  double ar = 0.0, ar1 = 0.0, ar10 = 0.0;
  double ar_s = 0.0, ar_m = 0.0, ar_l = 0.0;
  double ar_ho = 0.0, ar_mo = 0.0, ar_lo = 0.0;

  // Column order of the results tables.
  static const std::array<const char*, 15>& names();
  std::array<double, 15> values() const;
};

// One object instance as a sorted list of flat pixel indices.
struct Instance {
  std::vector<std::uint32_t> pixels;
  double bbox_area = 0.0;
  double occlusion = 1.0;  // ground truth only
  double score = 0.0;      // detections only
};

struct EvalImage {
  std::vector<Instance> ground_truth;
  std::vector<Instance> detections;
};

// Ground truth from a labelled instance map: instances with at least one
// visible pixel, each carrying occlusion_scores[label - 1].
std::vector<Instance> instances_from_labels(const LabelMap& labels,
                                            std::span<const double> occlusion_scores = {});
EvalImage make_eval_image(const LabelMap& gt_labels, std::span<const double> occlusion_scores,
                          const clustering::Segmentation& seg);

double mask_iou(const Mask& a, const Mask& b);
double mask_iou(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) noexcept;

struct MatchResult {
  std::vector<int> detection_match;  // matched ground-truth index or -1
  std::vector<int> truth_match;      // matched detection index or -1
};

// Greedy matching; `detections` must already be sorted by descending score.
// Each detection (first max_det only) takes the unmatched ground truth with
// the highest IoU >= threshold, ties to the lower index.
MatchResult match_detections(std::span<const Instance> detections,
                             std::span<const Instance> ground_truth, double iou_threshold,
                             int max_det);

// Precision-recall of one score-ordered detection list: 101-point
// interpolated AP (COCO convention). Returns -1 when num_truth == 0.
double interpolated_ap(std::span<const bool> is_true_positive, std::size_t num_truth);

EvalResult compute_metrics(std::span<const EvalImage> images, const EvalConfig& cfg = {});

std::string to_json(const EvalResult& result);
// Aligned two-row text table (header + values) in the results-table order.
std::string format_table(const EvalResult& result, const std::string& label = "model");

}  // namespace clusterseg::eval
