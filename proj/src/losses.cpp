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

#include "clusterseg/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "clusterseg/rng.hpp"

namespace clusterseg::losses {

namespace {

constexpr int kDim = geometry::kFeatureDim;

// Cross-entropy of a two-logit softmax against class `target`; optionally
// returns softmax - onehot.
double softmax_ce(double bg, double fg, int target, double* d_bg, double* d_fg) {
  const double m = std::max(bg, fg);
  const double e_bg = std::exp(bg - m);
  const double e_fg = std::exp(fg - m);
  const double z = e_bg + e_fg;
  const double lse = m + std::log(z);
  if (d_bg) {
    *d_bg = e_bg / z - (target == 0 ? 1.0 : 0.0);
    *d_fg = e_fg / z - (target == 1 ? 1.0 : 0.0);
  }
  return lse - (target == 1 ? fg : bg);
}

void check_map(const Grid<double>& g, int channels, int h, int w, const char* name) {
  if (g.channels() != channels || !g.same_shape(h, w)) {
    throw Error(ErrorCode::kShapeMismatch, std::string(name) + " has the wrong shape");
  }
}

void reset(Grid<double>* grad, int h, int w, int channels) {
  if (grad) *grad = Grid<double>(h, w, channels, 0.0);
}

std::size_t count_foreground(const Mask& fg) {
  std::size_t n = 0;
  for (auto v : fg.values()) n += v != 0;
  return n;
}

// Weighted terms in LossBreakdown order: s, cen, p, var, vio.
std::array<double, 5> weighted_terms(const RawPrediction& pred, const Annotation& ann,
                                     const LabelMap& instance_map, const LossWeights& w) {
  return {w.lambda_s * semantic_mask_loss(pred.mask_logits, ann.fg_mask),
          w.lambda_cen * center_loss(pred.eta_logits, ann.eta_gt, ann.fg_mask),
          w.lambda_p * pixel_loss(pred.xi_hat, pred.b_hat, ann, w.lambda_xi, w.lambda_b),
          w.lambda_var * variance_loss(pred.xi_hat, instance_map),
          w.lambda_vio * violation_loss(pred.xi_hat, ann, w.lambda_v)};
}

}  // namespace

RawPrediction RawPrediction::zeros(int height, int width) {
  RawPrediction r;
  r.xi_hat = Grid<double>(height, width, kDim, 0.0);
  r.b_hat = Grid<double>(height, width, 1, 0.0);
  r.eta_logits = Grid<double>(height, width, 2, 0.0);
  r.mask_logits = Grid<double>(height, width, 2, 0.0);
  return r;
}

void RawPrediction::check_shape(int height, int width) const {
  check_map(xi_hat, kDim, height, width, "xi_hat");
  check_map(b_hat, 1, height, width, "b_hat");
  check_map(eta_logits, 2, height, width, "eta_logits");
  check_map(mask_logits, 2, height, width, "mask_logits");
}

void LossWeights::validate() const {
  for (double v : {lambda_s, lambda_cen, lambda_var, lambda_vio, lambda_xi, lambda_b, lambda_p}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "loss weights must be finite and non-negative");
    }
  }
  if (!(lambda_v > 0.0 && lambda_v <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda_v must lie in (0, 1]");
  }
}

double semantic_mask_loss(const Grid<double>& mask_logits, const Mask& fg_gt, Grid<double>* grad) {
  const int h = fg_gt.height();
  const int w = fg_gt.width();
  check_map(mask_logits, 2, h, w, "mask_logits");
  reset(grad, h, w, 2);
  const std::size_t n = fg_gt.pixel_count();
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double d0 = 0.0;
    double d1 = 0.0;
    sum += softmax_ce(mask_logits.at(p, 0), mask_logits.at(p, 1), fg_gt.at(p) ? 1 : 0,
                      grad ? &d0 : nullptr, &d1);
    if (grad) {
      grad->at(p, 0) = d0 * inv_n;
      grad->at(p, 1) = d1 * inv_n;
    }
  }
  return sum * inv_n;
}

double center_loss(const Grid<double>& eta_logits, const Mask& eta_gt, const Mask& fg_gt,
                   Grid<double>* grad) {
  const int h = fg_gt.height();
  const int w = fg_gt.width();
  check_map(eta_logits, 2, h, w, "eta_logits");
  reset(grad, h, w, 2);
  const std::size_t n_fg = count_foreground(fg_gt);
  if (n_fg == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n_fg);
  double sum = 0.0;
  for (std::size_t p = 0; p < fg_gt.pixel_count(); ++p) {
    if (!fg_gt.at(p)) continue;
    double d0 = 0.0;
    double d1 = 0.0;
    sum += softmax_ce(eta_logits.at(p, 0), eta_logits.at(p, 1), eta_gt.at(p) ? 1 : 0,
                      grad ? &d0 : nullptr, &d1);
    if (grad) {
      grad->at(p, 0) = d0 * inv_n;
      grad->at(p, 1) = d1 * inv_n;
    }
  }
  return sum * inv_n;
}

double pixel_loss(const Grid<double>& xi_hat, const Grid<double>& b_hat, const Annotation& ann,
                  double lambda_xi, double lambda_b, Grid<double>* grad_xi, Grid<double>* grad_b) {
  const int h = ann.height();
  const int w = ann.width();
  check_map(xi_hat, kDim, h, w, "xi_hat");
  check_map(b_hat, 1, h, w, "b_hat");
  reset(grad_xi, h, w, kDim);
  reset(grad_b, h, w, 1);
  const std::size_t n_fg = count_foreground(ann.fg_mask);
  if (n_fg == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n_fg);

  double xi_sum = 0.0;
  double b_sum = 0.0;
  for (std::size_t p = 0; p < ann.fg_mask.pixel_count(); ++p) {
    if (!ann.fg_mask.at(p)) continue;
    for (int c = 0; c < kDim; ++c) {
      const double d = xi_hat.at(p, c) - ann.xi_map.at(p, c);
      xi_sum += d * d;
      if (grad_xi) grad_xi->at(p, c) = 2.0 * lambda_xi * d * inv_n;
    }
    const double db = b_hat.at(p) - ann.b_map.at(p);
    b_sum += db * db;
    if (grad_b) grad_b->at(p) = 2.0 * lambda_b * db * inv_n;
  }
  return lambda_xi * xi_sum * inv_n + lambda_b * b_sum * inv_n;
}

double variance_loss(const Grid<double>& xi_hat, const LabelMap& instance_map, Grid<double>* grad) {
  const int h = instance_map.height();
  const int w = instance_map.width();
  check_map(xi_hat, kDim, h, w, "xi_hat");
  reset(grad, h, w, kDim);

  int labels = 0;
  for (int v : instance_map.values()) labels = std::max(labels, v);
  std::vector<std::array<double, kDim>> mean(labels + 1, std::array<double, kDim>{});
  std::vector<std::size_t> count(labels + 1, 0);
  for (std::size_t p = 0; p < instance_map.pixel_count(); ++p) {
    const int k = instance_map.at(p);
    if (k <= 0) continue;
    ++count[k];
    for (int c = 0; c < kDim; ++c) mean[k][c] += xi_hat.at(p, c);
  }
  for (int k = 1; k <= labels; ++k) {
    if (count[k] == 0) continue;
    for (double& m : mean[k]) m /= static_cast<double>(count[k]);
  }

  std::vector<double> per_object(labels + 1, 0.0);
  for (std::size_t p = 0; p < instance_map.pixel_count(); ++p) {
    const int k = instance_map.at(p);
    if (k <= 0) continue;
    const double inv_n = 1.0 / static_cast<double>(count[k]);
    for (int c = 0; c < kDim; ++c) {
      const double d = xi_hat.at(p, c) - mean[k][c];
      per_object[k] += d * d;
      // The mean's own derivative contributes -2/N^2 sum(d) = 0.
      if (grad) grad->at(p, c) = 2.0 * d * inv_n;
    }
  }
  double total = 0.0;
  for (int k = 1; k <= labels; ++k) {
    if (count[k] > 0) total += per_object[k] / static_cast<double>(count[k]);
  }
  return total;
}

double violation_loss(const Grid<double>& xi_hat, const Annotation& ann, double lambda_v,
                      Grid<double>* grad) {
  const int h = ann.height();
  const int w = ann.width();
  check_map(xi_hat, kDim, h, w, "xi_hat");
  reset(grad, h, w, kDim);
  double total = 0.0;
  for (std::size_t p = 0; p < ann.fg_mask.pixel_count(); ++p) {
    if (!ann.fg_mask.at(p)) continue;
    const double dist = geometry::feature_distance(xi_hat.pixel(p), ann.xi_map.pixel(p));
    if (!(dist > lambda_v * ann.b_map.at(p))) continue;
    total += dist;
    if (grad) {
      for (int c = 0; c < kDim; ++c) grad->at(p, c) = (xi_hat.at(p, c) - ann.xi_map.at(p, c)) / dist;
    }
  }
  return total;
}

LossBreakdown total_loss(const RawPrediction& pred, const Annotation& ann,
                         const LabelMap& instance_map, const LossWeights& weights) {
  weights.validate();
  const int h = ann.height();
  const int w = ann.width();
  pred.check_shape(h, w);
  if (!instance_map.same_shape(h, w)) {
    throw Error(ErrorCode::kShapeMismatch, "instance map does not match the annotation");
  }

  LossBreakdown out;
  out.gradient = RawPrediction::zeros(h, w);
  Grid<double> g_mask, g_eta, g_xi_p, g_b, g_var, g_vio;
  out.l_s = semantic_mask_loss(pred.mask_logits, ann.fg_mask, &g_mask);
  out.l_cen = center_loss(pred.eta_logits, ann.eta_gt, ann.fg_mask, &g_eta);
  out.l_p = weights.lambda_p *
            pixel_loss(pred.xi_hat, pred.b_hat, ann, weights.lambda_xi, weights.lambda_b, &g_xi_p, &g_b);
  out.l_var = variance_loss(pred.xi_hat, instance_map, &g_var);
  out.l_vio = violation_loss(pred.xi_hat, ann, weights.lambda_v, &g_vio);
  out.total = weights.lambda_s * out.l_s + weights.lambda_cen * out.l_cen + out.l_p +
              weights.lambda_var * out.l_var + weights.lambda_vio * out.l_vio;

  auto& g = out.gradient;
  for (std::size_t i = 0; i < g.mask_logits.size(); ++i) {
    g.mask_logits.values()[i] = weights.lambda_s * g_mask.values()[i];
    g.eta_logits.values()[i] = weights.lambda_cen * g_eta.values()[i];
  }
  for (std::size_t i = 0; i < g.b_hat.size(); ++i) {
    g.b_hat.values()[i] = weights.lambda_p * g_b.values()[i];
  }
  for (std::size_t i = 0; i < g.xi_hat.size(); ++i) {
    g.xi_hat.values()[i] = weights.lambda_p * g_xi_p.values()[i] +
                           weights.lambda_var * g_var.values()[i] +
                           weights.lambda_vio * g_vio.values()[i];
  }
  return out;
}

GradCheckReport finite_diff_check(const RawPrediction& pred, const Annotation& ann,
                                  const LabelMap& instance_map, const LossWeights& weights,
                                  const GradCheckOptions& options) {
  if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-3)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must lie in [1e-7, 1e-3]");
  }
  LossBreakdown base = total_loss(pred, ann, instance_map, weights);
  if (options.corrupt_gradient) options.corrupt_gradient(base.gradient);

  std::vector<std::size_t> fg;
  for (std::size_t p = 0; p < ann.fg_mask.pixel_count(); ++p) {
    if (ann.fg_mask.at(p)) fg.push_back(p);
  }
  const std::size_t n_pix = ann.fg_mask.pixel_count();
  const double eps = options.epsilon;
  CounterRng rng(options.seed, /*stream=*/7);
  RawPrediction probe = pred;
  GradCheckReport report;
  if (n_pix == 0) return report;

  const int max_draws = options.samples * 50 + 100;
  for (int draw = 0; report.checked < options.samples && draw < max_draws; ++draw) {
    // Heads in rotation; centroid, radius and feature coordinates mostly
    // drawn from the foreground, where those terms live.
    const int head = draw % 4;
    const bool from_fg = head != 0 && !fg.empty() && rng.uniform() < 0.875;
    const std::size_t p = from_fg ? fg[rng.next_u64() % fg.size()] : rng.next_u64() % n_pix;

    Grid<double>* field = nullptr;
    const Grid<double>* analytic_field = nullptr;
    int channel = 0;
    switch (head) {
      case 0:
        field = &probe.mask_logits;
        analytic_field = &base.gradient.mask_logits;
        channel = static_cast<int>(rng.next_u64() % 2);
        break;
      case 1:
        field = &probe.eta_logits;
        analytic_field = &base.gradient.eta_logits;
        channel = static_cast<int>(rng.next_u64() % 2);
        break;
      case 2:
        field = &probe.b_hat;
        analytic_field = &base.gradient.b_hat;
        break;
      default:
        field = &probe.xi_hat;
        analytic_field = &base.gradient.xi_hat;
        channel = static_cast<int>(rng.next_u64() % kDim);
        break;
    }

    bool violating = false;
    if (head == 3 && ann.fg_mask.at(p)) {
      const double dist = geometry::feature_distance(pred.xi_hat.pixel(p), ann.xi_map.pixel(p));
      const double threshold = weights.lambda_v * ann.b_map.at(p);
      if (std::abs(dist - threshold) < 10.0 * eps) {
        ++report.skipped_near_threshold;
        continue;
      }
      violating = dist > threshold;
    }

    double& x = field->at(p, channel);
    const double saved = x;
    x = saved + eps;
    const auto plus = weighted_terms(probe, ann, instance_map, weights);
    x = saved - eps;
    const auto minus = weighted_terms(probe, ann, instance_map, weights);
    x = saved;

    double numeric = 0.0;
    for (std::size_t t = 0; t < plus.size(); ++t) numeric += (plus[t] - minus[t]) / (2.0 * eps);
    const double analytic = analytic_field->at(p, channel);
    const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(numeric));

    ++report.checked;
    switch (head) {
      case 0: ++report.mask_coords; break;
      case 1: ++report.eta_coords; break;
      case 2: ++report.b_coords; break;
      default:
        ++report.xi_coords;
        if (ann.fg_mask.at(p)) ++report.xi_foreground_coords;
        if (violating) ++report.xi_violating_coords;
        break;
    }
    if (rel > report.max_rel_error || report.worst.empty()) {
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel >= report.max_rel_error) {
        static constexpr const char* kHeads[] = {"mask_logits", "eta_logits", "b_hat", "xi_hat"};
        std::ostringstream os;
        os << kHeads[head] << "[row=" << p / ann.width() << ", col=" << p % ann.width()
           << ", ch=" << channel << "] analytic=" << analytic << " numeric=" << numeric;
        report.worst = os.str();
      }
    }
  }
  return report;
}

}  // namespace clusterseg::losses
