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

#include "clusterseg/mlp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "clusterseg/rng.hpp"
#include "endian_io.hpp"

namespace clusterseg::mlp {

namespace {

constexpr std::size_t kBlockPixels = 256;
constexpr char kCheckpointMagic[8] = {'C', 'S', 'E', 'G', 'M', 'L', 'P', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

constexpr std::array<int, 4> kDefaultSizes{kInputDim, kHiddenDim, kHiddenDim, kOutputDim};

// Forward pass of one pixel; writes into the cache rows for pixel n.
void forward_pixel(const MlpModel& model, std::size_t n, ForwardCache& cache) {
  const auto& layers = model.layers();
  const auto& params = model.parameters();
  const double* x = cache.input.data() + n * kInputDim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    const bool hidden = l + 1 < layers.size();
    double* out = hidden ? cache.pre[l].data() + n * layer.outputs
                         : cache.output.data() + n * layer.outputs;
    for (int o = 0; o < layer.outputs; ++o) {
      const double* w = params.data() + layer.weight_offset + static_cast<std::size_t>(o) * layer.inputs;
      double acc = params[layer.bias_offset + o];
      for (int i = 0; i < layer.inputs; ++i) acc += w[i] * x[i];
      out[o] = acc;
    }
    if (hidden) {
      double* act = cache.post[l].data() + n * layer.outputs;
      for (int o = 0; o < layer.outputs; ++o) act[o] = out[o] > 0.0 ? out[o] : 0.0;
      x = act;
    }
  }
}

ForwardCache allocate_cache(const MlpModel& model, std::span<const double> features,
                            std::size_t count) {
  const auto& layers = model.layers();
  if (layers.empty() || layers.front().inputs != kInputDim || layers.back().outputs != kOutputDim) {
    throw Error(ErrorCode::kShapeMismatch, "model does not have the expected input/output widths");
  }
  if (features.size() != count * kInputDim) {
    throw Error(ErrorCode::kShapeMismatch, "feature matrix does not hold count x 10 values");
  }
  ForwardCache cache;
  cache.count = count;
  cache.input.assign(features.begin(), features.end());
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    cache.pre.emplace_back(count * layers[l].outputs, 0.0);
    cache.post.emplace_back(count * layers[l].outputs, 0.0);
  }
  cache.output.assign(count * kOutputDim, 0.0);
  return cache;
}

void check_finite(const ForwardCache& cache) {
  for (double v : cache.output) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite MLP activation");
  }
  for (const auto& layer : cache.pre) {
    for (double v : layer) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite MLP activation");
    }
  }
}

// Adds pixel n's contribution to `grads`; `scratch` holds two hidden-width
// buffers.
void backward_pixel(const MlpModel& model, const ForwardCache& cache, const double* upstream,
                    std::size_t n, std::vector<double>& grads, std::vector<double>& delta,
                    std::vector<double>& next_delta) {
  const auto& layers = model.layers();
  const auto& params = model.parameters();
  const int last = static_cast<int>(layers.size()) - 1;

  delta.assign(upstream + n * kOutputDim, upstream + (n + 1) * kOutputDim);
  for (int l = last; l >= 0; --l) {
    const DenseLayer& layer = layers[l];
    const double* x = l == 0 ? cache.input.data() + n * kInputDim
                             : cache.post[l - 1].data() + n * layer.inputs;
    for (int o = 0; o < layer.outputs; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* gw = grads.data() + layer.weight_offset + static_cast<std::size_t>(o) * layer.inputs;
      for (int i = 0; i < layer.inputs; ++i) gw[i] += d * x[i];
      grads[layer.bias_offset + o] += d;
    }
    if (l == 0) break;
    next_delta.assign(layer.inputs, 0.0);
    for (int o = 0; o < layer.outputs; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* w = params.data() + layer.weight_offset + static_cast<std::size_t>(o) * layer.inputs;
      for (int i = 0; i < layer.inputs; ++i) next_delta[i] += w[i] * d;
    }
    const double* pre = cache.pre[l - 1].data() + n * layer.inputs;
    for (int i = 0; i < layer.inputs; ++i) {
      if (!(pre[i] > 0.0)) next_delta[i] = 0.0;
    }
    std::swap(delta, next_delta);
  }
}

void check_upstream(const ForwardCache& cache, const RawPrediction& upstream) {
  upstream.check_shape(cache.height, cache.width);
  if (static_cast<std::size_t>(cache.height) * cache.width != cache.count) {
    throw Error(ErrorCode::kShapeMismatch, "upstream gradient does not match the cached pass");
  }
}

}  // namespace

MlpModel::MlpModel() : MlpModel(kDefaultSizes) {}

MlpModel::MlpModel(std::span<const int> layer_sizes) {
  if (layer_sizes.size() < 2) throw Error(ErrorCode::kShapeMismatch, "an MLP needs at least two sizes");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    if (layer_sizes[l] <= 0 || layer_sizes[l + 1] <= 0) {
      throw Error(ErrorCode::kShapeMismatch, "layer sizes must be positive");
    }
    DenseLayer layer;
    layer.inputs = layer_sizes[l];
    layer.outputs = layer_sizes[l + 1];
    layer.weight_offset = offset;
    offset += static_cast<std::size_t>(layer.inputs) * layer.outputs;
    layer.bias_offset = offset;
    offset += layer.outputs;
    layers_.push_back(layer);
  }
  params_.assign(offset, 0.0);
}

MlpModel MlpModel::initialized(std::uint64_t seed) {
  MlpModel model;
  CounterRng rng(seed, 31);
  const std::size_t count = model.layers_.size();
  for (std::size_t l = 0; l < count; ++l) {
    const DenseLayer& layer = model.layers_[l];
    const double scale = l + 1 < count ? std::sqrt(2.0 / layer.inputs) : 0.1 / std::sqrt(layer.inputs);
    for (std::size_t i = 0; i < static_cast<std::size_t>(layer.inputs) * layer.outputs; ++i) {
      model.params_[layer.weight_offset + i] = scale * rng.normal();
    }
  }
  return model;
}

double MlpModel::weight(int layer, int out, int in) const noexcept {
  const DenseLayer& d = layers_[layer];
  return params_[d.weight_offset + static_cast<std::size_t>(out) * d.inputs + in];
}
double& MlpModel::weight(int layer, int out, int in) noexcept {
  const DenseLayer& d = layers_[layer];
  return params_[d.weight_offset + static_cast<std::size_t>(out) * d.inputs + in];
}
double MlpModel::bias(int layer, int out) const noexcept {
  return params_[layers_[layer].bias_offset + out];
}
double& MlpModel::bias(int layer, int out) noexcept { return params_[layers_[layer].bias_offset + out]; }

std::vector<double> frame_features(const scenegen::FrameBundle& frame) {
  const int h = frame.height();
  const int w = frame.width();
  std::vector<double> f(static_cast<std::size_t>(h) * w * kInputDim);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      double* x = f.data() + (static_cast<std::size_t>(row) * w + col) * kInputDim;
      x[0] = frame.rgb(row, col, 0);
      x[1] = frame.rgb(row, col, 1);
      x[2] = frame.rgb(row, col, 2);
      x[3] = frame.xyz(row, col, 0);
      x[4] = frame.xyz(row, col, 1);
      x[5] = frame.xyz(row, col, 2);
      x[6] = frame.depth(row, col);
      x[7] = static_cast<double>(col) / w;
      x[8] = static_cast<double>(row) / h;
      x[9] = 1.0;
    }
  }
  return f;
}

ForwardCache forward_features(const MlpModel& model, std::span<const double> features,
                              std::size_t count) {
  ForwardCache cache = allocate_cache(model, features, count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) forward_pixel(model, static_cast<std::size_t>(i), cache);
  check_finite(cache);
  return cache;
}

ForwardCache forward_features_serial(const MlpModel& model, std::span<const double> features,
                                     std::size_t count) {
  ForwardCache cache = allocate_cache(model, features, count);
  for (std::size_t i = 0; i < count; ++i) forward_pixel(model, i, cache);
  check_finite(cache);
  return cache;
}

RawPrediction unpack_output(std::span<const double> output, int height, int width) {
  RawPrediction raw = RawPrediction::zeros(height, width);
  const std::size_t count = static_cast<std::size_t>(height) * width;
  if (output.size() != count * kOutputDim) {
    throw Error(ErrorCode::kShapeMismatch, "output matrix does not match the frame size");
  }
  for (std::size_t p = 0; p < count; ++p) {
    const double* o = output.data() + p * kOutputDim;
    for (int c = 0; c < 9; ++c) raw.xi_hat.at(p, c) = o[kXiOffset + c];
    raw.b_hat.at(p) = o[kBOffset];
    raw.eta_logits.at(p, 0) = o[kEtaOffset];
    raw.eta_logits.at(p, 1) = o[kEtaOffset + 1];
    raw.mask_logits.at(p, 0) = o[kMaskOffset];
    raw.mask_logits.at(p, 1) = o[kMaskOffset + 1];
  }
  return raw;
}

std::vector<double> pack_upstream(const RawPrediction& upstream) {
  const std::size_t count = upstream.b_hat.pixel_count();
  std::vector<double> out(count * kOutputDim);
  for (std::size_t p = 0; p < count; ++p) {
    double* o = out.data() + p * kOutputDim;
    for (int c = 0; c < 9; ++c) o[kXiOffset + c] = upstream.xi_hat.at(p, c);
    o[kBOffset] = upstream.b_hat.at(p);
    o[kEtaOffset] = upstream.eta_logits.at(p, 0);
    o[kEtaOffset + 1] = upstream.eta_logits.at(p, 1);
    o[kMaskOffset] = upstream.mask_logits.at(p, 0);
    o[kMaskOffset + 1] = upstream.mask_logits.at(p, 1);
  }
  return out;
}

ForwardResult mlp_forward(const MlpModel& model, const scenegen::FrameBundle& frame) {
  const std::vector<double> features = frame_features(frame);
  ForwardResult result;
  result.cache = forward_features(model, features, frame.depth.pixel_count());
  result.cache.height = frame.height();
  result.cache.width = frame.width();
  result.output = unpack_output(result.cache.output, frame.height(), frame.width());
  return result;
}

std::vector<double> mlp_backward(const MlpModel& model, const ForwardCache& cache,
                                 const RawPrediction& upstream) {
  check_upstream(cache, upstream);
  const std::vector<double> packed = pack_upstream(upstream);
  const std::size_t blocks = (cache.count + kBlockPixels - 1) / kBlockPixels;
  std::vector<std::vector<double>> partial(blocks);
  const auto nb = static_cast<std::ptrdiff_t>(blocks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    std::vector<double> grads(model.parameter_count(), 0.0);
    std::vector<double> delta;
    std::vector<double> next_delta;
    const std::size_t begin = static_cast<std::size_t>(b) * kBlockPixels;
    const std::size_t end = std::min(cache.count, begin + kBlockPixels);
    for (std::size_t n = begin; n < end; ++n) {
      backward_pixel(model, cache, packed.data(), n, grads, delta, next_delta);
    }
    partial[b] = std::move(grads);
  }

  std::vector<double> total(model.parameter_count(), 0.0);
  for (const auto& part : partial) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += part[i];
  }
  return total;
}

std::vector<double> mlp_backward_serial(const MlpModel& model, const ForwardCache& cache,
                                        const RawPrediction& upstream) {
  check_upstream(cache, upstream);
  const std::vector<double> packed = pack_upstream(upstream);
  std::vector<double> grads(model.parameter_count(), 0.0);
  std::vector<double> delta;
  std::vector<double> next_delta;
  for (std::size_t n = 0; n < cache.count; ++n) {
    backward_pixel(model, cache, packed.data(), n, grads, delta, next_delta);
  }
  return grads;
}

AdamState AdamState::for_model(const MlpModel& model) {
  AdamState s;
  s.first_moment.assign(model.parameter_count(), 0.0);
  s.second_moment.assign(model.parameter_count(), 0.0);
  return s;
}

void adam_step(MlpModel& model, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
  auto& params = model.parameters();
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "Adam buffers do not match the model");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  const MlpModel& model = checkpoint.model;
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.layers().size()));
  for (const DenseLayer& layer : model.layers()) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(layer.inputs));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(layer.outputs));
  }
  detail::put_le<std::uint64_t>(os, model.parameter_count());
  for (double v : model.parameters()) detail::put_f64(os, v);
  detail::put_le<std::uint32_t>(os, checkpoint.epochs_completed);
  detail::put_le<std::uint8_t>(os, checkpoint.adam ? 1 : 0);
  if (checkpoint.adam) {
    const AdamState& adam = *checkpoint.adam;
    if (adam.first_moment.size() != model.parameter_count() ||
        adam.second_moment.size() != model.parameter_count()) {
      throw Error(ErrorCode::kShapeMismatch, "Adam state does not match the model");
    }
    detail::put_le<std::uint64_t>(os, adam.step);
    for (double v : adam.first_moment) detail::put_f64(os, v);
    for (double v : adam.second_moment) detail::put_f64(os, v);
  }
  if (!os) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot open model file '" + path + "'");
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic))) throw Error(ErrorCode::kTruncated, "model file too short");
  if (!std::equal(magic, magic + sizeof(magic), kCheckpointMagic)) {
    throw Error(ErrorCode::kBadMagic, "'" + path + "' is not a model checkpoint");
  }
  auto truncated = [&] { return Error(ErrorCode::kTruncated, "model file '" + path + "' is truncated"); };
  std::uint32_t version = 0;
  std::uint32_t layer_count = 0;
  if (!detail::get_le(is, version) || !detail::get_le(is, layer_count)) throw truncated();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kUnsupportedDtype, "unsupported checkpoint version " + std::to_string(version));
  }
  if (layer_count == 0 || layer_count > 64) throw Error(ErrorCode::kCorruptManifest, "bad layer count");
  std::vector<int> sizes;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    std::uint32_t in = 0;
    std::uint32_t out = 0;
    if (!detail::get_le(is, in) || !detail::get_le(is, out)) throw truncated();
    if (in == 0 || out == 0 || in > (1u << 20) || out > (1u << 20)) {
      throw Error(ErrorCode::kCorruptManifest, "bad layer shape");
    }
    if (l == 0) {
      sizes.push_back(static_cast<int>(in));
    } else if (sizes.back() != static_cast<int>(in)) {
      throw Error(ErrorCode::kCorruptManifest, "layer shapes do not chain");
    }
    sizes.push_back(static_cast<int>(out));
  }
  Checkpoint cp{MlpModel(sizes), std::nullopt, 0};
  std::uint64_t count = 0;
  if (!detail::get_le(is, count)) throw truncated();
  if (count != cp.model.parameter_count()) {
    throw Error(ErrorCode::kCorruptManifest, "parameter count does not match layer shapes");
  }
  for (double& v : cp.model.parameters()) {
    if (!detail::get_f64(is, v)) throw truncated();
  }
  std::uint8_t has_adam = 0;
  if (!detail::get_le(is, cp.epochs_completed) || !detail::get_le(is, has_adam)) throw truncated();
  if (has_adam) {
    AdamState adam = AdamState::for_model(cp.model);
    if (!detail::get_le(is, adam.step)) throw truncated();
    for (double& v : adam.first_moment) {
      if (!detail::get_f64(is, v)) throw truncated();
    }
    for (double& v : adam.second_moment) {
      if (!detail::get_f64(is, v)) throw truncated();
    }
    cp.adam = std::move(adam);
  }
  return cp;
}

}  // namespace clusterseg::mlp
