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

#include "clusterseg/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "clusterseg/geometry.hpp"

namespace clusterseg::clustering {

namespace {

constexpr int kDim = geometry::kFeatureDim;
using Vec9 = Eigen::Matrix<double, kDim, 1>;
using Mat9 = Eigen::Matrix<double, kDim, kDim>;

Vec9 feature_at(const Grid<double>& xi, std::size_t p) {
  return Eigen::Map<const Vec9>(xi.pixel(p).data());
}

struct Component {
  Vec9 mean = Vec9::Zero();
  Mat9 chol_lower = Mat9::Identity();
  double log_norm = 0.0;  // log weight - 0.5 log det
};

Component fit_component(const std::vector<std::size_t>& pixels, const Grid<double>& xi,
                        double weight, int& fallbacks) {
  Component c;
  for (std::size_t p : pixels) c.mean += feature_at(xi, p);
  c.mean /= static_cast<double>(pixels.size());
  Mat9 cov = Mat9::Zero();
  for (std::size_t p : pixels) {
    const Vec9 d = feature_at(xi, p) - c.mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(pixels.size());
  cov += kCovarianceRegularization * Mat9::Identity();

  Eigen::LLT<Mat9> llt(cov);
  double log_det = std::numeric_limits<double>::quiet_NaN();
  if (llt.info() == Eigen::Success) {
    log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }
  if (!std::isfinite(log_det)) {
    ++fallbacks;
    const double var = std::max(cov.trace() / kDim, kCovarianceRegularization);
    c.chol_lower = std::sqrt(var) * Mat9::Identity();
    log_det = kDim * std::log(var);
  } else {
    c.chol_lower = llt.matrixL();
  }
  c.log_norm = std::log(weight) - 0.5 * log_det;
  return c;
}

double log_density(const Component& c, const Vec9& x) {
  const Vec9 z = c.chol_lower.triangularView<Eigen::Lower>().solve(x - c.mean);
  return c.log_norm - 0.5 * z.squaredNorm();
}

Segmentation refine_impl(const Segmentation& seg, const Prediction& pred, RefineStats* stats,
                         bool parallel) {
  pred.validate();
  if (!seg.labels.same_extent(pred.mask_prob)) {
    throw Error(ErrorCode::kShapeMismatch, "segmentation and prediction sizes differ");
  }
  const int m_count = seg.instance_count();
  RefineStats local;
  if (m_count <= 1) {
    if (stats) *stats = local;
    return seg;
  }

  std::vector<std::vector<std::size_t>> members(m_count + 1);
  std::vector<std::size_t> foreground;
  for (std::size_t p = 0; p < seg.labels.pixel_count(); ++p) {
    const int m = seg.labels.at(p);
    if (m > 0) {
      members[m].push_back(p);
      foreground.push_back(p);
    }
  }
  const double n_fg = static_cast<double>(foreground.size());

  std::vector<Component> comps(m_count + 1);
  std::vector<bool> active(m_count + 1, false);
  for (int m = 1; m <= m_count; ++m) {
    if (members[m].empty()) continue;
    comps[m] = fit_component(members[m], pred.xi_hat,
                             static_cast<double>(members[m].size()) / n_fg,
                             local.covariance_fallbacks);
    active[m] = true;
  }

  std::vector<int> assigned(foreground.size(), 0);
  const auto n = static_cast<std::ptrdiff_t>(foreground.size());
  auto assign = [&](std::ptrdiff_t i) {
    const Vec9 x = feature_at(pred.xi_hat, foreground[i]);
    int best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int m = 1; m <= m_count; ++m) {
      if (!active[m]) continue;
      const double ll = log_density(comps[m], x);
      if (best == 0 || ll > best_ll) {
        best = m;
        best_ll = ll;
      }
    }
    assigned[i] = best;
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) assign(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) assign(i);
  }

  std::vector<std::size_t> sizes(m_count + 1, 0);
  for (std::size_t i = 0; i < foreground.size(); ++i) {
    ++sizes[assigned[i]];
    if (assigned[i] != seg.labels.at(foreground[i])) ++local.reassigned_pixels;
  }
  std::vector<int> remap(m_count + 1, 0);
  Segmentation out;
  for (int m = 1; m <= m_count; ++m) {
    if (sizes[m] == 0) {
      ++local.dropped_instances;
      continue;
    }
    remap[m] = static_cast<int>(out.seeds.size()) + 1;
    out.seeds.push_back(seg.seeds[m - 1]);
  }
  out.labels = LabelMap(seg.labels.height(), seg.labels.width(), 1, 0);
  std::vector<double> eta_sum(out.seeds.size() + 1, 0.0);
  std::vector<std::size_t> count(out.seeds.size() + 1, 0);
  for (std::size_t i = 0; i < foreground.size(); ++i) {
    const int label = remap[assigned[i]];
    out.labels.at(foreground[i]) = label;
    eta_sum[label] += pred.eta_hat.at(foreground[i]);
    ++count[label];
  }
  out.scores.resize(out.seeds.size());
  for (std::size_t m = 1; m <= out.seeds.size(); ++m) {
    out.scores[m - 1] = eta_sum[m] / static_cast<double>(count[m]);
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace

Prediction Prediction::zeros(int height, int width) {
  Prediction p;
  p.xi_hat = Grid<double>(height, width, kDim, 0.0);
  p.eta_hat = Grid<double>(height, width, 1, 0.0);
  p.b_hat = Grid<double>(height, width, 1, 0.0);
  p.mask_prob = Grid<double>(height, width, 1, 0.0);
  return p;
}

void Prediction::validate() const {
  if (xi_hat.channels() != kDim || !xi_hat.same_extent(mask_prob) ||
      !eta_hat.same_extent(mask_prob) || !b_hat.same_extent(mask_prob) ||
      eta_hat.channels() != 1 || b_hat.channels() != 1 || mask_prob.channels() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "prediction maps do not share dimensions");
  }
  for (double v : xi_hat.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite feature prediction");
  }
  for (double v : b_hat.values()) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::kInvalidArgument, "radius must be finite and >= 0");
  }
  for (const Grid<double>* g : {&eta_hat, &mask_prob}) {
    for (double v : g->values()) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "probability outside [0, 1]");
    }
  }
}

Segmentation seed_segmentation(const Prediction& pred, double fg_threshold) {
  pred.validate();
  const int h = pred.height();
  const int w = pred.width();

  std::vector<std::size_t> order;
  for (std::size_t p = 0; p < pred.mask_prob.pixel_count(); ++p) {
    if (pred.mask_prob.at(p) >= fg_threshold) order.push_back(p);
  }
  // Highest eta first; row-major index breaks ties by (row, col).
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pred.eta_hat.at(a) > pred.eta_hat.at(b);
  });

  Segmentation seg;
  seg.labels = LabelMap(h, w, 1, 0);
  std::vector<std::size_t> unassigned = order;  // kept in seed order
  while (!unassigned.empty()) {
    const std::size_t s = unassigned.front();
    const int label = seg.instance_count() + 1;
    const auto seed_xi = pred.xi_hat.pixel(s);
    const double radius = pred.b_hat.at(s);

    double sum = 0.0;
    std::size_t count = 0;
    std::vector<std::size_t> rest;
    rest.reserve(unassigned.size());
    for (std::size_t p : unassigned) {
      if (geometry::feature_distance(pred.xi_hat.pixel(p), seed_xi) <= radius) {
        seg.labels.at(p) = label;
        sum += pred.eta_hat.at(p);
        ++count;
      } else {
        rest.push_back(p);
      }
    }
    seg.seeds.push_back({static_cast<int>(s / w), static_cast<int>(s % w)});
    seg.scores.push_back(sum / static_cast<double>(count));
    unassigned = std::move(rest);
  }
  return seg;
}

Segmentation gmm_refine(const Segmentation& seg, const Prediction& pred, RefineStats* stats) {
  return refine_impl(seg, pred, stats, /*parallel=*/true);
}

Segmentation gmm_refine_serial(const Segmentation& seg, const Prediction& pred,
                               RefineStats* stats) {
  return refine_impl(seg, pred, stats, /*parallel=*/false);
}

Segmentation segment(const Prediction& pred, double fg_threshold, RefineStats* stats) {
  return gmm_refine(seed_segmentation(pred, fg_threshold), pred, stats);
}

}  // namespace clusterseg::clustering
