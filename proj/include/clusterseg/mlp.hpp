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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clusterseg/losses.hpp"
#include "clusterseg/scenegen.hpp"

namespace clusterseg::mlp {

using losses::RawPrediction;

// Per-pixel input: (r, g, b, x, y, z, depth, u / W, v / H, 1).
inline constexpr int kInputDim = 10;
inline constexpr int kHiddenDim = 64;
// Head layout in the output layer: xi (9), B (1), eta logits (2), mask
// logits (2).
inline constexpr int kXiOffset = 0;
inline constexpr int kBOffset = 9;
inline constexpr int kEtaOffset = 10;
inline constexpr int kMaskOffset = 12;
inline constexpr int kOutputDim = 14;

struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::size_t weight_offset = 0;  // outputs x inputs, row-major
  std::size_t bias_offset = 0;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Two ReLU trunk layers followed by one linear layer holding all heads.
// Parameters live in one flat buffer so the optimizer and checkpoint code
// can treat them uniformly.
class MlpModel {
 public:
  MlpModel();
  explicit MlpModel(std::span<const int> layer_sizes);

  // He-normal trunk, scaled-down output layer, zero biases.
  static MlpModel initialized(std::uint64_t seed);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<double>& parameters() noexcept { return params_; }
  const std::vector<double>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  double weight(int layer, int out, int in) const noexcept;
  double& weight(int layer, int out, int in) noexcept;
  double bias(int layer, int out) const noexcept;
  double& bias(int layer, int out) noexcept;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<DenseLayer> layers_;
  std::vector<double> params_;
};

// Activations kept for the backward pass; row n is pixel n.
struct ForwardCache {
  std::size_t count = 0;
  std::vector<double> input;                  // count x kInputDim
  std::vector<std::vector<double>> pre;       // per hidden layer, count x width
  std::vector<std::vector<double>> post;      // ReLU outputs
  std::vector<double> output;                 // count x kOutputDim
  int height = 0;
  int width = 0;
};

// Builds the per-pixel input matrix of a frame.
std::vector<double> frame_features(const scenegen::FrameBundle& frame);

// Forward pass over `count` rows of `features`; parallel over pixel blocks.
// Throws kNonFinite when any activation is not finite.
ForwardCache forward_features(const MlpModel& model, std::span<const double> features,
                              std::size_t count);
ForwardCache forward_features_serial(const MlpModel& model, std::span<const double> features,
                                     std::size_t count);

struct ForwardResult {
  RawPrediction output;
  ForwardCache cache;
};

ForwardResult mlp_forward(const MlpModel& model, const scenegen::FrameBundle& frame);

// Reverse-mode gradients of a loss whose derivative w.r.t. the heads is
// `upstream`. Returned buffer matches MlpModel::parameters(). Partial sums
// are accumulated per fixed pixel block and combined in block order, so the
// result does not depend on the thread count.
std::vector<double> mlp_backward(const MlpModel& model, const ForwardCache& cache,
                                 const RawPrediction& upstream);
// Plain pixel-order accumulation, single-threaded.
std::vector<double> mlp_backward_serial(const MlpModel& model, const ForwardCache& cache,
                                        const RawPrediction& upstream);

// Upstream gradient as a flat count x kOutputDim matrix.
std::vector<double> pack_upstream(const RawPrediction& upstream);
RawPrediction unpack_output(std::span<const double> output, int height, int width);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  static AdamState for_model(const MlpModel& model);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update.
void adam_step(MlpModel& model, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg = {});

struct Checkpoint {
  MlpModel model;
  std::optional<AdamState> adam;
  std::uint32_t epochs_completed = 0;
};

// Binary layout (little-endian): "CSEGMLP\0", u32 version, u32 layer count,
// per layer u32 inputs and u32 outputs, u64 parameter count, f64 parameters,
// u32 epochs completed, u8 has_adam, then u64 step, f64 first moments and
// f64 second moments when present.
void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace clusterseg::mlp
