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
#include <span>
#include <string>
#include <vector>

#include "clusterseg/annotation.hpp"
#include "clusterseg/eval.hpp"
#include "clusterseg/losses.hpp"
#include "clusterseg/mlp.hpp"
#include "clusterseg/scenegen.hpp"

namespace clusterseg::train {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 4;
  std::uint64_t seed = 0;
  mlp::AdamConfig adam;
  losses::LossWeights weights;
  // After `schedule_epoch` (1-based) the variance and violation weights
  // switch to the values below. Disabled when schedule_epoch <= 0.
  int schedule_epoch = 5;
  double scheduled_lambda_var = 100.0;
  double scheduled_lambda_vio = 100.0;
  double fg_threshold = clustering::kDefaultForegroundThreshold;

  void validate() const;
};

// Loss weights in effect during `epoch` (1-based).
losses::LossWeights weights_for_epoch(const TrainConfig& cfg, int epoch);

struct Sample {
  scenegen::FrameBundle frame;
  annotation::Annotation annotation;
  std::vector<double> features;  // cached mlp::frame_features
};

Sample make_sample(scenegen::FrameBundle frame, annotation::Annotation ann);

// Mean of each loss term over the frames of one epoch, plus post-clustering
// AP at the end of the epoch.
struct EpochLog {
  int epoch = 0;  // 0 = untrained model
  double lambda_var = 0.0;
  double lambda_vio = 0.0;
  double l_s = 0.0;
  double l_cen = 0.0;
  double l_p = 0.0;
  double l_var = 0.0;
  double l_vio = 0.0;
  double total = 0.0;
  double ap = 0.0;
};

std::string csv_header();
std::string csv_row(const EpochLog& log);

// Losses of a fixed model over all samples (no update).
EpochLog evaluate_losses(const mlp::MlpModel& model, std::span<const Sample> samples,
                         const losses::LossWeights& weights);

// Segments every sample with the model's predictions and returns the
// evaluator's AP.
double evaluate_ap(const mlp::MlpModel& model, std::span<const Sample> samples,
                   double fg_threshold);

// Runs one epoch of minibatch Adam: gradients are averaged over each batch
// and the sample order is a permutation drawn from (seed, epoch).
EpochLog train_epoch(mlp::MlpModel& model, mlp::AdamState& adam, std::span<const Sample> samples,
                     const TrainConfig& cfg, int epoch);

// Trains from `start` (holding epochs_completed) up to cfg.epochs. The
// callback sees each epoch's log and the checkpoint after it. When `start`
// has no completed epochs, an epoch-0 row for the untrained model is
// emitted first.
std::vector<EpochLog> run_training(
    mlp::Checkpoint& start, std::span<const Sample> samples, const TrainConfig& cfg,
    const std::function<void(const EpochLog&, const mlp::Checkpoint&)>& on_epoch = {});

}  // namespace clusterseg::train
