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
#include <string>

#include "clusterseg/annotation.hpp"
#include "clusterseg/clustering.hpp"
#include "clusterseg/losses.hpp"

namespace clusterseg::predictor {

using annotation::Annotation;
using clustering::Prediction;
using losses::RawPrediction;

enum class NoiseMode { kGaussian, kUniformBall };

const char* to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(const std::string& name);

struct NoiseSpec {
  double sigma_xi = 0.0;
  double sigma_b = 0.0;
  double sigma_eta = 0.0;
  double flip_rate = 0.0;  // probability of flipping each pixel's mask
  NoiseMode mode = NoiseMode::kGaussian;
  // Uniform-ball radius for the feature noise; |eps| < ball_radius strictly.
  double ball_radius = 0.0;

  void validate() const;
};

// Ground truth as a prediction: eta and mask as {0, 1} probabilities.
Prediction oracle_predict(const Annotation& ann);

// Ground truth as saturated logits (+-logit_magnitude) for the loss heads.
RawPrediction oracle_raw(const Annotation& ann, double logit_magnitude = 50.0);

// Ground truth perturbed at mixed scales: foreground pixels alternate
// between a feature error far inside the violation radius and one far
// outside it, B is jittered and kept positive, and logits are unit-variance
// normals. Input for gradient checks.
RawPrediction perturbed_raw(const Annotation& ann, std::uint64_t seed);

// Oracle plus iid noise per field; probabilities clamped to [0, 1] and radii
// to >= 0. Deterministic per seed.
Prediction noisy_predict(const Annotation& ann, const NoiseSpec& spec, std::uint64_t seed);

// Softmax channel 1 of each logit pair; radius clamped at 0.
Prediction to_prediction(const RawPrediction& raw);

}  // namespace clusterseg::predictor
