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
#include <vector>

#include "clusterseg/losses.hpp"
#include "clusterseg/scenegen.hpp"

namespace clusterseg::cli {

struct GenSettings {
  int count = 10;
  scenegen::GeneratorConfig generator;
  double candidate_fraction = 0.20;

  friend bool operator==(const GenSettings&, const GenSettings&) = default;
};

struct InferSettings {
  std::string predictor = "oracle";  // oracle | noisy | mlp
  double sigma_xi = 0.0;
  double sigma_b = 0.0;
  double sigma_eta = 0.0;
  double flip_rate = 0.0;
  std::string noise_mode = "gaussian";
  // Feature noise ball radius as a multiple of the frame's smallest
  // foreground B; > 0 selects uniform-ball noise.
  double ball_radius_factor = 0.0;
  double fg_threshold = 0.5;
  std::vector<double> sweep_sigmas;

  friend bool operator==(const InferSettings&, const InferSettings&) = default;
};

struct TrainSettings {
  int epochs = 30;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int schedule_epoch = 5;
  double scheduled_lambda_var = 100.0;
  double scheduled_lambda_vio = 100.0;

  friend bool operator==(const TrainSettings&, const TrainSettings&) = default;
};

struct GradcheckSettings {
  int frames = 4;
  int size = 8;
  int samples = 500;
  double epsilon = 1e-5;
  double tolerance = 1e-4;

  friend bool operator==(const GradcheckSettings&, const GradcheckSettings&) = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 0;  // 0 = CLUSTERSEG_JOBS or the OpenMP default
  GenSettings gen;
  InferSettings infer;
  losses::LossWeights weights;
  TrainSettings train;
  GradcheckSettings gradcheck;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string to_json(const RunConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const std::string& text);

}  // namespace clusterseg::cli
