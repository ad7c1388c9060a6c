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

#include "clusterseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "clusterseg/clustering.hpp"
#include "clusterseg/predictor.hpp"
#include "clusterseg/rng.hpp"

namespace clusterseg::train {

namespace {

constexpr std::uint64_t kShuffleStream = 41;

mlp::ForwardResult forward(const mlp::MlpModel& model, const Sample& s) {
  mlp::ForwardResult r;
  r.cache = mlp::forward_features(model, s.features, s.frame.depth.pixel_count());
  r.cache.height = s.frame.height();
  r.cache.width = s.frame.width();
  r.output = mlp::unpack_output(r.cache.output, s.frame.height(), s.frame.width());
  return r;
}

void accumulate(EpochLog& log, const losses::LossBreakdown& b) {
  log.l_s += b.l_s;
  log.l_cen += b.l_cen;
  log.l_p += b.l_p;
  log.l_var += b.l_var;
  log.l_vio += b.l_vio;
  log.total += b.total;
}

void average(EpochLog& log, std::size_t n) {
  const double inv = 1.0 / static_cast<double>(n);
  log.l_s *= inv;
  log.l_cen *= inv;
  log.l_p *= inv;
  log.l_var *= inv;
  log.l_vio *= inv;
  log.total *= inv;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)), kShuffleStream);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid Adam hyperparameters");
  }
  weights.validate();
}

losses::LossWeights weights_for_epoch(const TrainConfig& cfg, int epoch) {
  losses::LossWeights w = cfg.weights;
  if (cfg.schedule_epoch > 0 && epoch > cfg.schedule_epoch) {
    w.lambda_var = cfg.scheduled_lambda_var;
    w.lambda_vio = cfg.scheduled_lambda_vio;
  }
  return w;
}

Sample make_sample(scenegen::FrameBundle frame, annotation::Annotation ann) {
  Sample s;
  s.features = mlp::frame_features(frame);
  s.frame = std::move(frame);
  s.annotation = std::move(ann);
  return s;
}

std::string csv_header() {
  return "epoch,lambda_var,lambda_vio,l_s,l_cen,l_p,l_var,l_vio,total,ap";
}

std::string csv_row(const EpochLog& log) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", log.epoch,
                log.lambda_var, log.lambda_vio, log.l_s, log.l_cen, log.l_p, log.l_var, log.l_vio,
                log.total, log.ap);
  return buf;
}

EpochLog evaluate_losses(const mlp::MlpModel& model, std::span<const Sample> samples,
                         const losses::LossWeights& weights) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyInput, "no training samples");
  EpochLog log;
  log.lambda_var = weights.lambda_var;
  log.lambda_vio = weights.lambda_vio;
  for (const Sample& s : samples) {
    const auto r = forward(model, s);
    accumulate(log, losses::total_loss(r.output, s.annotation, s.frame.instance_map, weights));
  }
  average(log, samples.size());
  return log;
}

double evaluate_ap(const mlp::MlpModel& model, std::span<const Sample> samples,
                   double fg_threshold) {
  std::vector<eval::EvalImage> images;
  images.reserve(samples.size());
  for (const Sample& s : samples) {
    const auto r = forward(model, s);
    const auto seg = clustering::segment(predictor::to_prediction(r.output), fg_threshold);
    images.push_back(eval::make_eval_image(s.frame.instance_map, s.frame.occlusion_scores, seg));
  }
  const double ap = eval::compute_metrics(images).ap;
  return std::isnan(ap) ? 0.0 : ap;
}

EpochLog train_epoch(mlp::MlpModel& model, mlp::AdamState& adam, std::span<const Sample> samples,
                     const TrainConfig& cfg, int epoch) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyInput, "no training samples");
  const losses::LossWeights weights = weights_for_epoch(cfg, epoch);
  EpochLog log;
  log.epoch = epoch;
  log.lambda_var = weights.lambda_var;
  log.lambda_vio = weights.lambda_vio;

  const auto order = epoch_order(samples.size(), cfg.seed, epoch);
  std::vector<double> grads(model.parameter_count());
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
    std::fill(grads.begin(), grads.end(), 0.0);
    for (std::size_t i = start; i < stop; ++i) {
      const Sample& s = samples[order[i]];
      const auto r = forward(model, s);
      const auto loss = losses::total_loss(r.output, s.annotation, s.frame.instance_map, weights);
      accumulate(log, loss);
      const auto g = mlp::mlp_backward(model, r.cache, loss.gradient);
      for (std::size_t k = 0; k < grads.size(); ++k) grads[k] += g[k];
    }
    const double inv = 1.0 / static_cast<double>(stop - start);
    for (double& g : grads) g *= inv;
    mlp::adam_step(model, grads, adam, cfg.adam);
  }
  average(log, samples.size());
  log.ap = evaluate_ap(model, samples, cfg.fg_threshold);
  return log;
}

std::vector<EpochLog> run_training(
    mlp::Checkpoint& state, std::span<const Sample> samples, const TrainConfig& cfg,
    const std::function<void(const EpochLog&, const mlp::Checkpoint&)>& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw Error(ErrorCode::kEmptyInput, "no training samples");
  if (!state.adam) state.adam = mlp::AdamState::for_model(state.model);

  std::vector<EpochLog> logs;
  if (state.epochs_completed == 0) {
    EpochLog untrained = evaluate_losses(state.model, samples, weights_for_epoch(cfg, 1));
    untrained.ap = evaluate_ap(state.model, samples, cfg.fg_threshold);
    logs.push_back(untrained);
    if (on_epoch) on_epoch(untrained, state);
  }
  for (int epoch = static_cast<int>(state.epochs_completed) + 1; epoch <= cfg.epochs; ++epoch) {
    logs.push_back(train_epoch(state.model, *state.adam, samples, cfg, epoch));
    state.epochs_completed = static_cast<std::uint32_t>(epoch);
    if (on_epoch) on_epoch(logs.back(), state);
  }
  return logs;
}

}  // namespace clusterseg::train
