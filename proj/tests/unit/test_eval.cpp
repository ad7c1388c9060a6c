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
#include <cstring>

#include "brute_force_ap.hpp"
#include "tiny_cases.hpp"
#include "clusterseg/eval.hpp"
#include "clusterseg/rng.hpp"
#include "doctest.h"

using namespace clusterseg;
using namespace clusterseg::eval;

namespace {

using testing::jittered;
using testing::random_rect;
using testing::rect;
using testing::to_instance;

constexpr int kH = testing::kTinySize;
constexpr int kW = testing::kTinySize;

bool bit_identical(const EvalResult& a, const EvalResult& b) {
  const auto va = a.values();
  const auto vb = b.values();
  return std::memcmp(va.data(), vb.data(), sizeof(double) * va.size()) == 0;
}

}  // namespace

TEST_CASE("mask IoU") {
  const Mask a = rect(0, 0, 4, 4);
  CHECK(mask_iou(a, a) == 1.0);
  CHECK(mask_iou(a, rect(4, 4, 8, 8)) == 0.0);
  CHECK(mask_iou(Mask(kH, kW), Mask(kH, kW)) == 0.0);
  // |a| = |b| = 100, overlap 50.
  const Mask big_a = rect(0, 0, 10, 10, 10, 15);
  const Mask big_b = rect(0, 5, 10, 15, 10, 15);
  CHECK(mask_iou(big_a, big_b) == doctest::Approx(1.0 / 3.0));
  const auto ia = to_instance(big_a), ib = to_instance(big_b);
  CHECK(mask_iou(ia.pixels, ib.pixels) == mask_iou(big_a, big_b));
  CHECK_THROWS_AS(mask_iou(a, Mask(3, 3)), Error);
}

TEST_CASE("greedy matching") {
  const std::vector<Instance> gts{to_instance(rect(0, 0, 2, 5))};
  // 6 of 10 pixels: IoU 0.6.
  std::vector<Instance> dets{to_instance(rect(0, 0, 2, 3), 0.9), to_instance(rect(0, 0, 2, 5), 0.5)};
  auto m = match_detections(std::span(dets).first(1), gts, 0.5, 100);
  CHECK(m.detection_match == std::vector<int>{0});
  for (double thr : {0.5, 0.55, 0.6}) CHECK(match_detections(std::span(dets).first(1), gts, thr, 100).detection_match[0] == 0);
  for (double thr : {0.65, 0.7, 0.95}) CHECK(match_detections(std::span(dets).first(1), gts, thr, 100).detection_match[0] == -1);
  // Two detections on one GT: the higher-scored one takes it.
  m = match_detections(dets, gts, 0.5, 100);
  CHECK(m.detection_match == std::vector<int>{0, -1});
  CHECK(m.truth_match == std::vector<int>{0});
  // max_det cuts the list.
  m = match_detections(dets, gts, 0.9, 1);
  CHECK(m.truth_match == std::vector<int>{-1});
  // Equal IoU: the lower GT index wins.
  const std::vector<Instance> twin{to_instance(rect(0, 0, 2, 2)), to_instance(rect(0, 2, 2, 4))};
  const std::vector<Instance> straddle{to_instance(rect(0, 1, 2, 3), 1.0)};
  CHECK(match_detections(straddle, twin, 0.3, 100).detection_match[0] == 0);
}

TEST_CASE("interpolated AP") {
  const bool all_tp[] = {true, true};
  CHECK(interpolated_ap(all_tp, 2) == 1.0);
  CHECK(interpolated_ap({}, 3) == 0.0);
  CHECK(interpolated_ap({}, 0) == -1.0);
  // FP then TP with one GT: precision 1/2 at every recall level.
  const bool fp_tp[] = {false, true};
  CHECK(interpolated_ap(fp_tp, 1) == doctest::Approx(0.5));
  // One of two GTs found: levels 0..0.50 reach precision 1.
  const bool one[] = {true};
  CHECK(interpolated_ap(one, 2) == doctest::Approx(51.0 / 101.0));
}

TEST_CASE("IoU 0.6 gives AP = AR = 0.3") {
  EvalImage img;
  img.ground_truth.push_back(to_instance(rect(0, 0, 2, 5)));
  img.detections.push_back(to_instance(rect(0, 0, 2, 3), 0.8));
  const std::vector<EvalImage> images{img};
  const auto r = compute_metrics(images);
  CHECK(r.ap == 0.3);
  CHECK(r.ar == 0.3);
  CHECK(r.ap50 == 1.0);
  CHECK(r.ap75 == 0.0);

  testing::TinyCase c;
  c.truth = {rect(0, 0, 2, 5)};
  c.predictions = {rect(0, 0, 2, 3)};
  c.scores = {0.8};
  CHECK(testing::brute_force_ap(c).ap == 0.3);
}

TEST_CASE("two GTs, one found: AR1 = 0.5") {
  EvalImage img;
  img.ground_truth = {to_instance(rect(0, 0, 3, 3)), to_instance(rect(4, 4, 8, 8))};
  img.detections = {to_instance(rect(0, 0, 3, 3), 0.9)};
  const std::vector<EvalImage> images{img};
  const auto r = compute_metrics(images);
  CHECK(r.ar1 == 0.5);
  CHECK(r.ar10 == 0.5);
  CHECK(r.ar == 0.5);
}

TEST_CASE("perfect and empty predictions") {
  LabelMap labels(kH, kW);
  labels(0, 0) = labels(0, 1) = 1;
  labels(5, 5) = 2;
  const std::vector<double> occ{0.5, 0.9};
  clustering::Segmentation seg;
  seg.labels = labels;
  seg.scores = {0.4, 0.7};
  seg.seeds = {Pixel{0, 0}, Pixel{5, 5}};
  const std::vector<EvalImage> perfect{make_eval_image(labels, occ, seg)};
  auto r = compute_metrics(perfect);
  // AR1 caps each image at one detection, so two objects give 0.5.
  CHECK(r.ar1 == 0.5);
  r.ar1 = 1.0;
  for (double v : r.values()) CHECK((std::isnan(v) || v == 1.0));
  CHECK(r.ap == 1.0);
  CHECK(r.ar_mo == 1.0);
  CHECK(r.ar_lo == 1.0);
  CHECK(std::isnan(r.ar_ho));
  CHECK(std::isnan(r.ap_l));

  clustering::Segmentation none;
  none.labels = LabelMap(kH, kW);
  const std::vector<EvalImage> empty{make_eval_image(labels, occ, none)};
  const auto z = compute_metrics(empty);
  CHECK(z.ap == 0.0);
  CHECK(z.ar == 0.0);
  testing::TinyCase c;
  c.truth = {rect(0, 0, 2, 2)};
  CHECK(testing::brute_force_ap(c).ap == 0.0);
}

TEST_CASE("ground truth comes from visible instances only") {
  LabelMap labels(4, 4);
  labels(1, 1) = 3;
  const std::vector<double> occ{0.2, 0.0, 0.6};
  const auto gts = instances_from_labels(labels, occ);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].occlusion == 0.6);
  CHECK(gts[0].pixels == std::vector<std::uint32_t>{5});
  CHECK(gts[0].bbox_area == 1.0);
}

TEST_CASE("occlusion bin boundaries are half-open") {
  CHECK(occlusion_bin(0.0) == 0);
  CHECK(occlusion_bin(0.29999) == 0);
  CHECK(occlusion_bin(0.3) == 1);
  CHECK(occlusion_bin(0.74999) == 1);
  CHECK(occlusion_bin(0.75) == 2);
  CHECK(occlusion_bin(1.0) == 2);
  CHECK(occlusion_bin(-0.01) == -1);
  CHECK(occlusion_bin(1.01) == -1);
}

TEST_CASE("occlusion-binned recall follows detection status") {
  EvalImage img;
  img.ground_truth = {to_instance(rect(0, 0, 3, 3), 0.0, 0.25), to_instance(rect(4, 4, 8, 8), 0.0, 0.9)};
  img.detections = {to_instance(rect(4, 4, 8, 8), 0.9)};
  std::vector<EvalImage> images{img};
  auto r = compute_metrics(images);
  CHECK(r.ar_ho == 0.0);
  CHECK(r.ar_lo == 1.0);
  CHECK(std::isnan(r.ar_mo));
  images[0].detections.push_back(to_instance(rect(0, 0, 3, 3), 0.5));
  r = compute_metrics(images);
  CHECK(r.ar_ho == 1.0);
}

TEST_CASE("size bins use the ground-truth bounding box") {
  EvalImage img;
  Mask big = rect(0, 0, 40, 40, 100, 100);  // 1600 px^2: medium
  Mask small = rect(50, 50, 52, 52, 100, 100);
  img.ground_truth = {to_instance(big), to_instance(small)};
  img.detections = {to_instance(big, 0.9)};
  const std::vector<EvalImage> images{img};
  const auto r = compute_metrics(images);
  CHECK(r.ap_m == 1.0);
  CHECK(r.ar_m == 1.0);
  CHECK(r.ap_s == 0.0);
  CHECK(r.ar_s == 0.0);
  CHECK(std::isnan(r.ap_l));
}

TEST_CASE("property: evaluator equals the brute-force oracle on 100 tiny cases") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto c = testing::random_tiny_case(seed);
    const std::vector<EvalImage> images{testing::to_eval_image(c)};
    const auto r = compute_metrics(images);
    const auto o = testing::brute_force_ap(c);
    if (std::isnan(o.ap)) {
      CHECK(std::isnan(r.ap));
      continue;
    }
    CHECK(r.ap == o.ap);
    CHECK(r.ap50 == o.ap50);
    CHECK(r.ap75 == o.ap75);
    CHECK(r.ar == doctest::Approx(o.ar).epsilon(1e-15));
  }
}

TEST_CASE("property: permutation invariance, monotonicity and AR ordering") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto c = testing::random_tiny_case(seed);
    if (c.truth.empty()) continue;
    CounterRng rng(seed, 9);
    std::vector<EvalImage> images{testing::to_eval_image(c)};
    // Extra images with many detections so max_det 1 and 10 bind.
    for (int k = 0; k < 2; ++k) {
      EvalImage extra;
      std::vector<Mask> truth;
      for (int g = 0; g < 4; ++g) {
        truth.push_back(random_rect(rng));
        extra.ground_truth.push_back(to_instance(truth.back()));
      }
      for (int d = 0; d < 14; ++d) {
        const Mask m = d % 3 == 0 ? random_rect(rng) : jittered(truth[d % 4], rng);
        extra.detections.push_back(to_instance(m, rng.uniform()));
      }
      images.push_back(extra);
    }
    const auto base = compute_metrics(images);
    CHECK(base.ar1 <= base.ar10);
    CHECK(base.ar10 <= base.ar);
    CHECK(base.ap50 >= base.ap);

    auto shuffled = images;
    for (auto& img : shuffled) std::reverse(img.detections.begin(), img.detections.end());
    CHECK(bit_identical(compute_metrics(shuffled), base));

    auto added = images;
    added[0].detections.push_back(to_instance(c.truth[0], rng.uniform()));
    const auto more = compute_metrics(added);
    CHECK(more.ar >= base.ar);
    CHECK(more.ar10 >= base.ar10);

    if (!images[0].detections.empty()) {
      auto dup = images;
      dup[0].detections.push_back(dup[0].detections[0]);
      dup[0].detections.back().score -= 1e-9;
      CHECK(compute_metrics(dup).ap <= base.ap);
    }
  }
}

TEST_CASE("reports") {
  EvalResult r;
  r.ap = 0.5;
  r.ar_ho = std::nan("");
  const auto json = to_json(r);
  CHECK(json.find("\"AP\": 0.5") != std::string::npos);
  CHECK(json.find("\"AR_HO\": null") != std::string::npos);
  const auto table = format_table(r, "oracle");
  CHECK(table.find("AR_LO") != std::string::npos);
  CHECK(table.find("oracle") != std::string::npos);
  CHECK(table.find("  50.0") != std::string::npos);
  CHECK(EvalResult::names().front() == std::string("AP"));
}
