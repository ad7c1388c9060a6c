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
#include <set>

#include "clusterseg/clustering.hpp"
#include "clusterseg/predictor.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace clusterseg;
using namespace clusterseg::clustering;

namespace {

// Four foreground pixels in a row with features {0, 0, 2e0, 2e0}.
Prediction four_pixels(double radius) {
  Prediction p = Prediction::zeros(1, 4);
  const double eta[4] = {0.9, 0.1, 0.8, 0.2};
  for (int c = 0; c < 4; ++c) {
    p.mask_prob(0, c) = 1.0;
    p.eta_hat(0, c) = eta[c];
    p.b_hat(0, c) = radius;
    if (c >= 2) p.xi_hat(0, c, 0) = 2.0;
  }
  return p;
}

using Vec = std::array<double, 9>;
using Mat = std::array<std::array<double, 9>, 9>;

// Plain-loop Gaussian log density up to the shared -4.5 log(2 pi) term.
double oracle_log_density(const std::vector<Vec>& members, double weight, const Vec& x) {
  Vec mean{};
  for (const Vec& v : members)
    for (int i = 0; i < 9; ++i) mean[i] += v[i] / members.size();
  Mat cov{};
  for (const Vec& v : members)
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) cov[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]) / members.size();
  for (int i = 0; i < 9; ++i) cov[i][i] += 1e-6;
  Mat l{};
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = cov[i][j];
      for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      l[i][j] = i == j ? std::sqrt(s) : s / l[j][j];
    }
  }
  Vec z{};
  double log_det = 0.0;
  for (int i = 0; i < 9; ++i) {
    double s = x[i] - mean[i];
    for (int k = 0; k < i; ++k) s -= l[i][k] * z[k];
    z[i] = s / l[i][i];
    log_det += 2.0 * std::log(l[i][i]);
  }
  double q = 0.0;
  for (double v : z) q += v * v;
  return std::log(weight) - 0.5 * log_det - 0.5 * q;
}

}  // namespace

TEST_CASE("no foreground gives no instances") {
  Prediction p = Prediction::zeros(5, 5);
  const auto seg = segment(p);
  CHECK(seg.instance_count() == 0);
  for (int v : seg.labels.values()) CHECK(v == 0);
}

TEST_CASE("greedy seeding on four pixels") {
  const auto seg = seed_segmentation(four_pixels(1.0));
  REQUIRE(seg.instance_count() == 2);
  CHECK(seg.labels(0, 0) == 1);
  CHECK(seg.labels(0, 1) == 1);
  CHECK(seg.labels(0, 2) == 2);
  CHECK(seg.labels(0, 3) == 2);
  CHECK(seg.seeds[0] == Pixel{0, 0});
  CHECK(seg.seeds[1] == Pixel{0, 2});
  CHECK(seg.scores[0] == doctest::Approx(0.5));
  CHECK(seg.scores[1] == doctest::Approx(0.5));

  const auto merged = seed_segmentation(four_pixels(3.0));
  CHECK(merged.instance_count() == 1);
  for (int v : merged.labels.values()) CHECK(v == 1);
}

TEST_CASE("the seeding ball is closed") {
  // Distance exactly 2 with radius 2: absorbed.
  const auto seg = seed_segmentation(four_pixels(2.0));
  CHECK(seg.instance_count() == 1);
}

TEST_CASE("seed ties resolve to the smallest (row, col)") {
  Prediction p = Prediction::zeros(2, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    p.mask_prob.at(i) = 1.0;
    p.eta_hat.at(i) = 0.5;
    p.xi_hat.at(i, 0) = 10.0 * i;
  }
  const auto seg = seed_segmentation(p);
  REQUIRE(seg.instance_count() == 4);
  CHECK(seg.seeds[0] == Pixel{0, 0});
  CHECK(seg.seeds[1] == Pixel{0, 1});
  CHECK(seg.seeds[2] == Pixel{1, 0});
}

TEST_CASE("refinement leaves a single instance and a well-separated pair unchanged") {
  const auto one = seed_segmentation(four_pixels(3.0));
  CHECK(gmm_refine(one, four_pixels(3.0)) == one);
  const auto pred = four_pixels(1.0);
  const auto two = seed_segmentation(pred);
  RefineStats stats;
  CHECK(gmm_refine(two, pred, &stats).labels == two.labels);
  CHECK(stats.reassigned_pixels == 0);
}

TEST_CASE("refinement moves a mis-seeded pixel to the cluster it belongs to") {
  // Cluster A: +-e_i around 0; cluster B: +-e_i around 10*(1,...,1); one
  // pixel sitting on B's mean but labelled A.
  std::vector<Vec> points;
  std::vector<int> labels;
  for (int cluster = 0; cluster < 2; ++cluster) {
    for (int i = 0; i < 9; ++i) {
      for (double s : {-1.0, 1.0}) {
        Vec v{};
        if (cluster == 1) v.fill(10.0);
        v[i] += s;
        points.push_back(v);
        labels.push_back(cluster + 1);
      }
    }
  }
  Vec stray{};
  stray.fill(10.0);
  points.push_back(stray);
  labels.push_back(1);

  const int n = static_cast<int>(points.size());
  Prediction pred = Prediction::zeros(1, n);
  Segmentation seg;
  seg.labels = LabelMap(1, n);
  for (int i = 0; i < n; ++i) {
    pred.mask_prob(0, i) = 1.0;
    pred.eta_hat(0, i) = 0.5;
    for (int c = 0; c < 9; ++c) pred.xi_hat(0, i, c) = points[i][c];
    seg.labels(0, i) = labels[i];
  }
  seg.scores = {0.5, 0.5};
  seg.seeds = {Pixel{0, 0}, Pixel{0, 18}};

  std::vector<Vec> a, b;
  for (int i = 0; i < n; ++i) (labels[i] == 1 ? a : b).push_back(points[i]);
  const double wa = static_cast<double>(a.size()) / n;
  const double wb = static_cast<double>(b.size()) / n;

  RefineStats stats;
  const auto refined = gmm_refine(seg, pred, &stats);
  CHECK(refined == gmm_refine_serial(seg, pred));
  for (int i = 0; i < n; ++i) {
    const double la = oracle_log_density(a, wa, points[i]);
    const double lb = oracle_log_density(b, wb, points[i]);
    CHECK(refined.labels(0, i) == (lb > la ? 2 : 1));
  }
  CHECK(oracle_log_density(b, wb, stray) > oracle_log_density(a, wa, stray));
  CHECK(refined.labels(0, n - 1) == 2);
  CHECK(stats.reassigned_pixels >= 1);
  CHECK(stats.covariance_fallbacks == 0);
}

TEST_CASE("a rank-deficient covariance falls back to a spherical one") {
  // Cluster 1 spans +-1e10 along (1, 1, 0, ...): the regulariser is lost in
  // rounding and the factorisation fails.
  Prediction pred = Prediction::zeros(1, 4);
  Segmentation seg;
  seg.labels = LabelMap(1, 4);
  const double big = 1e10;
  const double xs[4][2] = {{big, big}, {-big, -big}, {3 * big, 0}, {3 * big, 1}};
  for (int i = 0; i < 4; ++i) {
    pred.mask_prob(0, i) = 1.0;
    pred.xi_hat(0, i, 0) = xs[i][0];
    pred.xi_hat(0, i, 1) = xs[i][1];
    seg.labels(0, i) = i < 2 ? 1 : 2;
  }
  seg.scores = {0, 0};
  seg.seeds = {Pixel{0, 0}, Pixel{0, 2}};
  RefineStats stats;
  const auto refined = gmm_refine(seg, pred, &stats);
  CHECK(stats.covariance_fallbacks >= 1);
  for (int v : refined.labels.values()) CHECK(v > 0);
}

TEST_CASE("oracle predictions reproduce the ground-truth partition") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = testing::make_case(seed, testing::generator(48, 2, 8));
    const auto pred = predictor::oracle_predict(c.ann);
    const auto seg = segment(pred);
    CHECK(testing::same_partition(seg.labels, c.frame.instance_map));
    CHECK(seg == segment(pred));
  }
}

TEST_CASE("property: partition, contiguity and refinement invariants under noise") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = testing::make_case(seed, testing::generator(32, 2, 8));
    predictor::NoiseSpec noise;
    noise.sigma_xi = 0.05;
    noise.sigma_eta = 0.2;
    noise.flip_rate = 0.05;
    const auto pred = predictor::noisy_predict(c.ann, noise, seed);
    const auto seeds = seed_segmentation(pred);
    RefineStats s1, s2;
    const auto refined = gmm_refine(seeds, pred, &s1);
    CHECK(refined == gmm_refine_serial(seeds, pred, &s2));
    CHECK(s1.reassigned_pixels == s2.reassigned_pixels);
    for (const Segmentation* seg : {&seeds, &refined}) {
      std::set<int> used;
      for (std::size_t p = 0; p < seg->labels.pixel_count(); ++p) {
        const int v = seg->labels.at(p);
        CHECK((v > 0) == (pred.mask_prob.at(p) >= 0.5));
        if (v > 0) used.insert(v);
      }
      CHECK(static_cast<int>(used.size()) == seg->instance_count());
      if (!used.empty()) CHECK(*used.rbegin() == seg->instance_count());
      CHECK(seg->seeds.size() == seg->scores.size());
      for (double s : seg->scores) CHECK((s >= 0.0 && s <= 1.0));
    }
  }
}

TEST_CASE("property: bounded feature noise keeps seeding exact") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto c = testing::make_case(seed, testing::generator(32, 2, 8));
    predictor::NoiseSpec noise;
    noise.mode = predictor::NoiseMode::kUniformBall;
    noise.ball_radius = 0.49 * annotation::min_foreground_radius(c.ann);
    const auto pred = predictor::noisy_predict(c.ann, noise, seed);
    CHECK(testing::same_partition(seed_segmentation(pred).labels, c.frame.instance_map));
  }
}
