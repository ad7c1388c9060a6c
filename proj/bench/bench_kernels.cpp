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

// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "clusterseg/annotation.hpp"
#include "clusterseg/clustering.hpp"
#include "clusterseg/geometry.hpp"
#include "clusterseg/mlp.hpp"
#include "clusterseg/predictor.hpp"
#include "clusterseg/scenegen.hpp"

namespace {

using namespace clusterseg;

scenegen::Scene bench_scene(int size) {
  scenegen::GeneratorConfig cfg;
  cfg.width = size;
  cfg.height = size;
  cfg.min_objects = 6;
  cfg.max_objects = 6;
  return scenegen::sample_scene(42, cfg);
}

void BM_Render(benchmark::State& state) {
  const auto scene = bench_scene(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(scenegen::render(scene));
}
void BM_RenderSerial(benchmark::State& state) {
  const auto scene = bench_scene(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(scenegen::render_serial(scene));
}

void BM_DepthToXyz(benchmark::State& state) {
  const auto scene = bench_scene(static_cast<int>(state.range(0)));
  const auto frame = scenegen::render(scene);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::depth_to_xyz(frame.depth, scene.camera));
}
void BM_DepthToXyzSerial(benchmark::State& state) {
  const auto scene = bench_scene(static_cast<int>(state.range(0)));
  const auto frame = scenegen::render(scene);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::depth_to_xyz_serial(frame.depth, scene.camera));
}

struct RefineInput {
  clustering::Prediction pred;
  clustering::Segmentation seeds;
};

RefineInput refine_input(int size) {
  const auto scene = bench_scene(size);
  const auto frame = scenegen::render(scene);
  const auto ann = annotation::annotate(scene, frame);
  predictor::NoiseSpec noise;
  noise.sigma_xi = 0.02;
  RefineInput in{predictor::noisy_predict(ann, noise, 7), {}};
  in.seeds = clustering::seed_segmentation(in.pred);
  return in;
}

void BM_GmmRefine(benchmark::State& state) {
  const auto in = refine_input(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(clustering::gmm_refine(in.seeds, in.pred));
}
void BM_GmmRefineSerial(benchmark::State& state) {
  const auto in = refine_input(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(clustering::gmm_refine_serial(in.seeds, in.pred));
}

void BM_MlpForward(benchmark::State& state) {
  const auto frame = scenegen::render(bench_scene(static_cast<int>(state.range(0))));
  const auto model = mlp::MlpModel::initialized(1);
  const auto features = mlp::frame_features(frame);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp::forward_features(model, features, frame.depth.pixel_count()));
  }
}
void BM_MlpForwardSerial(benchmark::State& state) {
  const auto frame = scenegen::render(bench_scene(static_cast<int>(state.range(0))));
  const auto model = mlp::MlpModel::initialized(1);
  const auto features = mlp::frame_features(frame);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp::forward_features_serial(model, features, frame.depth.pixel_count()));
  }
}

void BM_MlpBackward(benchmark::State& state) {
  const auto frame = scenegen::render(bench_scene(static_cast<int>(state.range(0))));
  const auto model = mlp::MlpModel::initialized(1);
  const auto fwd = mlp::mlp_forward(model, frame);
  for (auto _ : state) benchmark::DoNotOptimize(mlp::mlp_backward(model, fwd.cache, fwd.output));
}
void BM_MlpBackwardSerial(benchmark::State& state) {
  const auto frame = scenegen::render(bench_scene(static_cast<int>(state.range(0))));
  const auto model = mlp::MlpModel::initialized(1);
  const auto fwd = mlp::mlp_forward(model, frame);
  for (auto _ : state) benchmark::DoNotOptimize(mlp::mlp_backward_serial(model, fwd.cache, fwd.output));
}

}  // namespace

BENCHMARK(BM_Render)->Arg(64)->Arg(128);
BENCHMARK(BM_RenderSerial)->Arg(64)->Arg(128);
BENCHMARK(BM_DepthToXyz)->Arg(128)->Arg(256);
BENCHMARK(BM_DepthToXyzSerial)->Arg(128)->Arg(256);
BENCHMARK(BM_GmmRefine)->Arg(64)->Arg(128);
BENCHMARK(BM_GmmRefineSerial)->Arg(64)->Arg(128);
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(128);
BENCHMARK(BM_MlpForwardSerial)->Arg(64)->Arg(128);
BENCHMARK(BM_MlpBackward)->Arg(64);
BENCHMARK(BM_MlpBackwardSerial)->Arg(64);

BENCHMARK_MAIN();
