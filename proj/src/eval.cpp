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

#include "clusterseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace clusterseg::eval {

namespace {

constexpr int kRecallPoints = 101;

enum class DetState : unsigned char { kFalsePositive, kTruePositive, kIgnored };

double bbox_area(const std::vector<std::uint32_t>& pixels, int width) {
  if (pixels.empty()) return 0.0;
  int min_r = std::numeric_limits<int>::max(), max_r = -1;
  int min_c = std::numeric_limits<int>::max(), max_c = -1;
  for (std::uint32_t p : pixels) {
    const int r = static_cast<int>(p / width);
    const int c = static_cast<int>(p % width);
    min_r = std::min(min_r, r);
    max_r = std::max(max_r, r);
    min_c = std::min(min_c, c);
    max_c = std::max(max_c, c);
  }
  return static_cast<double>(max_r - min_r + 1) * static_cast<double>(max_c - min_c + 1);
}

std::vector<Instance> group_labels(const LabelMap& labels) {
  int max_label = 0;
  for (int v : labels.values()) max_label = std::max(max_label, v);
  std::vector<Instance> groups(max_label);
  for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
    const int k = labels.at(p);
    if (k > 0) groups[k - 1].pixels.push_back(static_cast<std::uint32_t>(p));
  }
  for (Instance& g : groups) g.bbox_area = bbox_area(g.pixels, labels.width());
  return groups;
}

// COCO-style greedy matching with ignore flags. Ground truth is visited
// non-ignored first; a detection already holding a non-ignored match stops
// at the ignored section. Unmatched detections are ignored when
// `det_ignored_if_unmatched` says so.
std::vector<DetState> match_with_ignores(const std::vector<std::vector<double>>& ious,
                                         std::size_t num_dets, const std::vector<bool>& gt_ignored,
                                         const std::vector<bool>& det_ignored_if_unmatched,
                                         double threshold, std::vector<int>* det_match = nullptr,
                                         std::vector<int>* gt_match = nullptr) {
  const std::size_t num_gts = gt_ignored.size();
  std::vector<std::size_t> order(num_gts);
  std::iota(order.begin(), order.end(), 0);
  std::stable_partition(order.begin(), order.end(), [&](std::size_t g) { return !gt_ignored[g]; });

  std::vector<bool> taken(num_gts, false);
  std::vector<DetState> states(num_dets, DetState::kFalsePositive);
  if (det_match) det_match->assign(num_dets, -1);
  if (gt_match) gt_match->assign(num_gts, -1);
  for (std::size_t d = 0; d < num_dets; ++d) {
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t g : order) {
      if (taken[g]) continue;
      if (best >= 0 && !gt_ignored[best] && gt_ignored[g]) break;
      const double iou = ious[d][g];
      if (iou < threshold) continue;
      if (best < 0 || iou > best_iou) {
        best = static_cast<int>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      states[d] = gt_ignored[best] ? DetState::kIgnored : DetState::kTruePositive;
      if (det_match) (*det_match)[d] = best;
      if (gt_match) (*gt_match)[best] = static_cast<int>(d);
    } else if (det_ignored_if_unmatched[d]) {
      states[d] = DetState::kIgnored;
    }
  }
  return states;
}

struct PreparedImage {
  std::vector<const Instance*> dets;  // score-descending, capped at the largest max_det
  std::vector<std::vector<double>> ious;
};

// Evaluation subset: which ground truth counts, and which unmatched
// detections are excused.
struct Subset {
  enum class Kind { kAll, kSize, kOcclusion } kind = Kind::kAll;
  Range range;
};

struct Curve {
  double ap = -1.0;
  double recall = -1.0;
};

Curve evaluate(const std::vector<PreparedImage>& prepared, std::span<const EvalImage> images,
               const Subset& subset, double threshold, int max_det) {
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> pooled;
  std::size_t num_truth = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& gts = images[i].ground_truth;
    const auto& img = prepared[i];
    std::vector<bool> gt_ignored(gts.size(), false);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (subset.kind == Subset::Kind::kSize) gt_ignored[g] = !subset.range.contains(gts[g].bbox_area);
      if (subset.kind == Subset::Kind::kOcclusion) gt_ignored[g] = !subset.range.contains(gts[g].occlusion);
      num_truth += !gt_ignored[g];
    }
    const std::size_t n_det = std::min(img.dets.size(), static_cast<std::size_t>(max_det));
    std::vector<bool> det_excused(n_det, false);
    if (subset.kind == Subset::Kind::kSize) {
      for (std::size_t d = 0; d < n_det; ++d) det_excused[d] = !subset.range.contains(img.dets[d]->bbox_area);
    }
    const auto states = match_with_ignores(img.ious, n_det, gt_ignored, det_excused, threshold);
    for (std::size_t d = 0; d < n_det; ++d) {
      if (states[d] == DetState::kIgnored) continue;
      pooled.push_back({img.dets[d]->score, states[d] == DetState::kTruePositive});
    }
  }
  Curve curve;
  if (num_truth == 0) return curve;
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  std::vector<bool> flags(pooled.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    flags[i] = pooled[i].tp;
    tp += pooled[i].tp;
  }
  // std::vector<bool> has no contiguous storage; copy for the span API.
  std::unique_ptr<bool[]> buf(new bool[flags.size() + 1]);
  for (std::size_t i = 0; i < flags.size(); ++i) buf[i] = flags[i];
  curve.ap = interpolated_ap(std::span<const bool>(buf.get(), flags.size()), num_truth);
  curve.recall = static_cast<double>(tp) / static_cast<double>(num_truth);
  return curve;
}

// Mean over defined (non-negative) entries; NaN when none are defined.
double mean_defined(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (v >= 0.0) {
      sum += v;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

}  // namespace

EvalConfig::EvalConfig() {
  for (int i = 0; i < 10; ++i) iou_thresholds.push_back((50 + 5 * i) / 100.0);
  size_bins = {Range{0.0, 32.0 * 32.0}, Range{32.0 * 32.0, 96.0 * 96.0},
               Range{96.0 * 96.0, 100000.0 * 100000.0}};
  occlusion_bins = {Range{0.0, 0.3}, Range{0.3, 0.75}, Range{0.75, 1.0, true}};
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty() || !std::is_sorted(iou_thresholds.begin(), iou_thresholds.end())) {
    throw Error(ErrorCode::kInvalidArgument, "IoU thresholds must be non-empty and ascending");
  }
  for (const auto* bins : {&size_bins, &occlusion_bins}) {
    for (std::size_t i = 0; i + 1 < bins->size(); ++i) {
      if ((*bins)[i].hi != (*bins)[i + 1].lo || (*bins)[i].hi_inclusive) {
        throw Error(ErrorCode::kInvalidArgument, "bins must be disjoint and contiguous");
      }
    }
  }
  if (!std::is_sorted(max_dets.begin(), max_dets.end()) || max_dets.front() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_dets must be ascending and positive");
  }
}

int occlusion_bin(double score, const EvalConfig& cfg) {
  for (int i = 0; i < 3; ++i) {
    if (cfg.occlusion_bins[i].contains(score)) return i;
  }
  return -1;
}

const std::array<const char*, 15>& EvalResult::names() {
  static const std::array<const char*, 15> kNames{"AP",   "AP50", "AP75", "AP_S", "AP_M",
                                                  "AP_L", "AR",   "AR1",  "AR10", "AR_S",
                                                  "AR_M", "AR_L", "AR_HO", "AR_MO", "AR_LO"};
  return kNames;
}

std::array<double, 15> EvalResult::values() const {
  return {ap, ap50, ap75, ap_s, ap_m, ap_l, ar, ar1, ar10, ar_s, ar_m, ar_l, ar_ho, ar_mo, ar_lo};
}

std::vector<Instance> instances_from_labels(const LabelMap& labels,
                                            std::span<const double> occlusion_scores) {
  std::vector<Instance> groups = group_labels(labels);
  std::vector<Instance> out;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].pixels.empty()) continue;
    if (k < occlusion_scores.size()) groups[k].occlusion = occlusion_scores[k];
    out.push_back(std::move(groups[k]));
  }
  return out;
}

EvalImage make_eval_image(const LabelMap& gt_labels, std::span<const double> occlusion_scores,
                          const clustering::Segmentation& seg) {
  if (!gt_labels.same_extent(seg.labels)) {
    throw Error(ErrorCode::kDimensionMismatch, "segmentation and ground truth sizes differ");
  }
  EvalImage image;
  image.ground_truth = instances_from_labels(gt_labels, occlusion_scores);
  std::vector<Instance> dets = group_labels(seg.labels);
  for (std::size_t m = 0; m < dets.size(); ++m) {
    if (dets[m].pixels.empty()) continue;
    dets[m].score = m < seg.scores.size() ? seg.scores[m] : 0.0;
    image.detections.push_back(std::move(dets[m]));
  }
  return image;
}

double mask_iou(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) noexcept {
  std::size_t inter = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_extent(b)) throw Error(ErrorCode::kDimensionMismatch, "masks differ in size");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    const bool x = a.at(p) != 0;
    const bool y = b.at(p) != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MatchResult match_detections(std::span<const Instance> detections,
                             std::span<const Instance> ground_truth, double iou_threshold,
                             int max_det) {
  const std::size_t n_det = std::min(detections.size(), static_cast<std::size_t>(std::max(0, max_det)));
  std::vector<std::vector<double>> ious(n_det, std::vector<double>(ground_truth.size()));
  for (std::size_t d = 0; d < n_det; ++d) {
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      ious[d][g] = mask_iou(detections[d].pixels, ground_truth[g].pixels);
    }
  }
  MatchResult result;
  match_with_ignores(ious, n_det, std::vector<bool>(ground_truth.size(), false),
                     std::vector<bool>(n_det, false), iou_threshold, &result.detection_match,
                     &result.truth_match);
  result.detection_match.resize(detections.size(), -1);
  return result;
}

double interpolated_ap(std::span<const bool> is_true_positive, std::size_t num_truth) {
  if (num_truth == 0) return -1.0;
  const std::size_t n = is_true_positive.size();
  std::vector<double> recall(n);
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += is_true_positive[i];
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_truth);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double sum = 0.0;
  for (int r = 0; r < kRecallPoints; ++r) {
    // Recall grid as numpy.linspace(0, 1, 101) produces it.
    const double level = r == kRecallPoints - 1 ? 1.0 : r * 0.01;
    const auto it = std::lower_bound(recall.begin(), recall.end(), level);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / kRecallPoints;
}

EvalResult compute_metrics(std::span<const EvalImage> images, const EvalConfig& cfg) {
  cfg.validate();
  const int max_cap = cfg.max_dets.back();
  std::vector<PreparedImage> prepared(images.size());
  const auto n_images = static_cast<std::ptrdiff_t>(images.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n_images; ++i) {
    const EvalImage& img = images[i];
    PreparedImage& out = prepared[i];
    for (const Instance& d : img.detections) out.dets.push_back(&d);
    std::stable_sort(out.dets.begin(), out.dets.end(),
                     [](const Instance* a, const Instance* b) { return a->score > b->score; });
    if (out.dets.size() > static_cast<std::size_t>(max_cap)) out.dets.resize(max_cap);
    out.ious.assign(out.dets.size(), std::vector<double>(img.ground_truth.size()));
    for (std::size_t d = 0; d < out.dets.size(); ++d) {
      for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
        out.ious[d][g] = mask_iou(out.dets[d]->pixels, img.ground_truth[g].pixels);
      }
    }
  }

  const std::size_t n_thr = cfg.iou_thresholds.size();
  auto sweep = [&](const Subset& subset, int max_det) {
    std::vector<double> ap(n_thr);
    std::vector<double> recall(n_thr);
    for (std::size_t t = 0; t < n_thr; ++t) {
      const Curve c = evaluate(prepared, images, subset, cfg.iou_thresholds[t], max_det);
      ap[t] = c.ap;
      recall[t] = c.recall;
    }
    return std::make_pair(ap, recall);
  };
  auto at_threshold = [&](const std::vector<double>& values, double thr) {
    for (std::size_t t = 0; t < n_thr; ++t) {
      if (std::abs(cfg.iou_thresholds[t] - thr) < 1e-12) {
        return values[t] >= 0.0 ? values[t] : std::numeric_limits<double>::quiet_NaN();
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  };

  EvalResult r;
  const Subset all{};
  const auto [ap_all, rec_all] = sweep(all, max_cap);
  r.ap = mean_defined(ap_all);
  r.ap50 = at_threshold(ap_all, 0.50);
  r.ap75 = at_threshold(ap_all, 0.75);
  r.ar = mean_defined(rec_all);
  r.ar1 = mean_defined(sweep(all, cfg.max_dets[0]).second);
  r.ar10 = mean_defined(sweep(all, cfg.max_dets[1]).second);

  std::array<double*, 3> ap_size{&r.ap_s, &r.ap_m, &r.ap_l};
  std::array<double*, 3> ar_size{&r.ar_s, &r.ar_m, &r.ar_l};
  for (int b = 0; b < 3; ++b) {
    const auto [ap, rec] = sweep(Subset{Subset::Kind::kSize, cfg.size_bins[b]}, max_cap);
    *ap_size[b] = mean_defined(ap);
    *ar_size[b] = mean_defined(rec);
  }
  std::array<double*, 3> ar_occ{&r.ar_ho, &r.ar_mo, &r.ar_lo};
  for (int b = 0; b < 3; ++b) {
    *ar_occ[b] = mean_defined(sweep(Subset{Subset::Kind::kOcclusion, cfg.occlusion_bins[b]}, max_cap).second);
  }
  return r;
}

std::string to_json(const EvalResult& result) {
  nlohmann::ordered_json j;
  const auto values = result.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) {
      j[EvalResult::names()[i]] = nullptr;
    } else {
      j[EvalResult::names()[i]] = values[i];
    }
  }
  return j.dump(2);
}

std::string format_table(const EvalResult& result, const std::string& label) {
  std::ostringstream os;
  const std::size_t label_width = std::max<std::size_t>(label.size(), 6);
  char buf[32];
  os << std::string(label_width, ' ');
  for (const char* name : EvalResult::names()) {
    std::snprintf(buf, sizeof(buf), " %6s", name);
    os << buf;
  }
  os << '\n' << label << std::string(label_width - label.size(), ' ');
  for (double v : result.values()) {
    if (std::isnan(v)) {
      std::snprintf(buf, sizeof(buf), " %6s", "-");
    } else {
      std::snprintf(buf, sizeof(buf), " %6.1f", 100.0 * v);
    }
    os << buf;
  }
  os << '\n';
  return os.str();
}

}  // namespace clusterseg::eval
