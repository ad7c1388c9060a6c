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

#include "clusterseg/predictor.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "clusterseg/rng.hpp"

namespace clusterseg::predictor {

namespace {

constexpr int kDim = geometry::kFeatureDim;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double sigmoid_of_pair(double bg, double fg) {
  // softmax([bg, fg])[1]
  const double d = fg - bg;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

}  // namespace

const char* to_string(NoiseMode mode) {
  return mode == NoiseMode::kGaussian ? "gaussian" : "uniform-ball";
}

NoiseMode noise_mode_from_string(const std::string& name) {
  if (name == "gaussian") return NoiseMode::kGaussian;
  if (name == "uniform-ball" || name == "ball") return NoiseMode::kUniformBall;
  throw Error(ErrorCode::kInvalidArgument, "unknown noise mode '" + name + "'");
}

void NoiseSpec::validate() const {
  for (double v : {sigma_xi, sigma_b, sigma_eta, flip_rate, ball_radius}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "noise parameters must be finite and >= 0");
    }
  }
  if (flip_rate > 1.0) throw Error(ErrorCode::kInvalidArgument, "flip rate must be <= 1");
}

Prediction oracle_predict(const Annotation& ann) {
  const int h = ann.height();
  const int w = ann.width();
  Prediction pred;
  pred.xi_hat = ann.xi_map;
  pred.b_hat = ann.b_map;
  pred.eta_hat = Grid<double>(h, w, 1, 0.0);
  pred.mask_prob = Grid<double>(h, w, 1, 0.0);
  for (std::size_t p = 0; p < ann.fg_mask.pixel_count(); ++p) {
    pred.eta_hat.at(p) = ann.eta_gt.at(p) ? 1.0 : 0.0;
    pred.mask_prob.at(p) = ann.fg_mask.at(p) ? 1.0 : 0.0;
  }
  return pred;
}

RawPrediction oracle_raw(const Annotation& ann, double logit_magnitude) {
  RawPrediction raw = RawPrediction::zeros(ann.height(), ann.width());
  raw.xi_hat = ann.xi_map;
  raw.b_hat = ann.b_map;
  for (std::size_t p = 0; p < ann.fg_mask.pixel_count(); ++p) {
    const double eta = ann.eta_gt.at(p) ? logit_magnitude : -logit_magnitude;
    const double fg = ann.fg_mask.at(p) ? logit_magnitude : -logit_magnitude;
    raw.eta_logits.at(p, 0) = -eta;
    raw.eta_logits.at(p, 1) = eta;
    raw.mask_logits.at(p, 0) = -fg;
    raw.mask_logits.at(p, 1) = fg;
  }
  return raw;
}

RawPrediction perturbed_raw(const Annotation& ann, std::uint64_t seed) {
  RawPrediction raw = RawPrediction::zeros(ann.height(), ann.width());
  CounterRng rng(seed, 111);
  std::size_t fg_seen = 0;
  for (std::size_t p = 0; p < ann.fg_mask.pixel_count(); ++p) {
    // Foreground pixels alternate per-coordinate scales 0.01 B and 0.5 B, so
    // the feature error lands well inside or well outside the violation
    // radius and both regimes are present whenever two pixels are.
    const bool large = ann.fg_mask.at(p) ? (fg_seen++ % 2 == 1) : rng.uniform() < 0.5;
    const double radius = std::max(ann.b_map.at(p), 0.1);
    const double scale = (large ? 0.5 : 0.01) * radius;
    for (int c = 0; c < geometry::kFeatureDim; ++c) {
      raw.xi_hat.at(p, c) = ann.xi_map.at(p, c) + scale * rng.normal();
    }
    raw.b_hat.at(p) = ann.b_map.at(p) + 0.1 + 0.1 * rng.uniform();
    for (int c = 0; c < 2; ++c) {
      raw.eta_logits.at(p, c) = rng.normal();
      raw.mask_logits.at(p, c) = rng.normal();
    }
  }
  return raw;
}

Prediction noisy_predict(const Annotation& ann, const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  Prediction pred = oracle_predict(ann);
  // Separate streams per field keep each field's noise independent of which
  // other fields are enabled.
  CounterRng xi_rng(seed, 101);
  CounterRng b_rng(seed, 102);
  CounterRng eta_rng(seed, 103);
  CounterRng flip_rng(seed, 104);

  for (std::size_t p = 0; p < pred.mask_prob.pixel_count(); ++p) {
    auto xi = pred.xi_hat.pixel(p);
    if (spec.mode == NoiseMode::kGaussian) {
      if (spec.sigma_xi > 0.0) {
        for (double& v : xi) v += spec.sigma_xi * xi_rng.normal();
      }
    } else if (spec.ball_radius > 0.0) {
      // Direction uniform on the sphere, radius r U^(1/9); redraw the rare
      // sample that rounds onto the boundary.
      for (;;) {
        std::array<double, kDim> dir{};
        double norm2 = 0.0;
        for (double& d : dir) {
          d = xi_rng.normal();
          norm2 += d * d;
        }
        const double norm = std::sqrt(norm2);
        if (norm < 1e-300) continue;
        const double r = spec.ball_radius * std::pow(xi_rng.uniform(), 1.0 / kDim);
        std::array<double, kDim> moved{};
        for (int c = 0; c < kDim; ++c) moved[c] = xi[c] + dir[c] / norm * r;
        if (geometry::feature_distance(moved, xi) < spec.ball_radius) {
          std::copy(moved.begin(), moved.end(), xi.begin());
          break;
        }
      }
    }
    if (spec.sigma_b > 0.0) {
      pred.b_hat.at(p) = std::max(0.0, pred.b_hat.at(p) + spec.sigma_b * b_rng.normal());
    }
    if (spec.sigma_eta > 0.0) {
      pred.eta_hat.at(p) = clamp01(pred.eta_hat.at(p) + spec.sigma_eta * eta_rng.normal());
    }
    if (spec.flip_rate > 0.0 && flip_rng.uniform() < spec.flip_rate) {
      pred.mask_prob.at(p) = 1.0 - pred.mask_prob.at(p);
    }
  }
  return pred;
}

Prediction to_prediction(const RawPrediction& raw) {
  const int h = raw.height();
  const int w = raw.width();
  raw.check_shape(h, w);
  Prediction pred;
  pred.xi_hat = raw.xi_hat;
  pred.b_hat = Grid<double>(h, w, 1, 0.0);
  pred.eta_hat = Grid<double>(h, w, 1, 0.0);
  pred.mask_prob = Grid<double>(h, w, 1, 0.0);
  for (std::size_t p = 0; p < pred.b_hat.pixel_count(); ++p) {
    pred.b_hat.at(p) = std::max(0.0, raw.b_hat.at(p));
    pred.eta_hat.at(p) = sigmoid_of_pair(raw.eta_logits.at(p, 0), raw.eta_logits.at(p, 1));
    pred.mask_prob.at(p) = sigmoid_of_pair(raw.mask_logits.at(p, 0), raw.mask_logits.at(p, 1));
  }
  return pred;
}

}  // namespace clusterseg::predictor
