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

#include "clusterseg/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"

#include "clusterseg/rng.hpp"

namespace clusterseg::scenegen {

using geometry::ObjectFeature;
using geometry::PointCloud;

namespace {

constexpr double kDepthTieTolerance = 1e-9;
constexpr double kAmbient = 0.2;

Vec3 cross(const Vec3& a, const Vec3& b) noexcept {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) noexcept {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

Vec3 add(const Vec3& a, const Vec3& b) noexcept { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 scale(const Vec3& a, double s) noexcept { return {a[0] * s, a[1] * s, a[2] * s}; }

Quaternion random_rotation(CounterRng& rng) {
  Quaternion q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  const double n = q.norm();
  if (n < 1e-12) return {};
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

}  // namespace

double Quaternion::norm() const noexcept { return std::sqrt(w * w + x * x + y * y + z * z); }

Vec3 Quaternion::rotate(const Vec3& v) const noexcept {
  // v' = v + 2 q_v x (q_v x v + w v)
  const Vec3 qv{x, y, z};
  const Vec3 t = add(cross(qv, v), scale(v, w));
  return add(v, scale(cross(qv, t), 2.0));
}

Vec3 Quaternion::rotate_inverse(const Vec3& v) const noexcept {
  return Quaternion{w, -x, -y, -z}.rotate(v);
}

const char* to_string(PrimitiveKind kind) {
  return kind == PrimitiveKind::kSphere ? "sphere" : "box";
}

PrimitiveKind primitive_kind_from_string(const std::string& name) {
  if (name == "sphere") return PrimitiveKind::kSphere;
  if (name == "box") return PrimitiveKind::kBox;
  throw Error(ErrorCode::kInvalidArgument, "unknown primitive kind '" + name + "'");
}

double Primitive::bounding_radius() const noexcept {
  if (kind == PrimitiveKind::kSphere) return half_extents[0];
  return std::sqrt(dot(half_extents, half_extents));
}

void Primitive::validate() const {
  for (double h : half_extents) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw Error(ErrorCode::kInvalidArgument, "half extents must be positive and finite");
    }
  }
  if (std::abs(rotation.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "rotation quaternion is not normalized");
  }
  for (double c : translation) {
    if (!std::isfinite(c)) throw Error(ErrorCode::kNonFinite, "translation is not finite");
  }
  for (double a : albedo) {
    if (!(a >= 0.0 && a <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "albedo outside [0, 1]");
  }
}

Primitive Primitive::sphere(const Vec3& center, double radius, const Vec3& albedo) {
  Primitive p;
  p.kind = PrimitiveKind::kSphere;
  p.translation = center;
  p.half_extents = {radius, radius, radius};
  p.albedo = albedo;
  return p;
}

Primitive Primitive::box(const Vec3& center, const Vec3& half_extents,
                         const Quaternion& rotation, const Vec3& albedo) {
  Primitive p;
  p.kind = PrimitiveKind::kBox;
  p.translation = center;
  p.half_extents = half_extents;
  p.rotation = rotation;
  p.albedo = albedo;
  return p;
}

void Scene::validate() const {
  camera.validate();
  if (objects.size() > static_cast<std::size_t>(kMaxObjects)) {
    throw Error(ErrorCode::kInvalidArgument, "scene holds more than 65534 objects");
  }
  for (const Primitive& p : objects) {
    p.validate();
    if (p.translation[2] - p.bounding_radius() <= kMinObjectDepth) {
      throw Error(ErrorCode::kInvalidArgument, "object is not in front of the camera");
    }
  }
  if (background_depth && !(*background_depth > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "background depth must be positive");
  }
}

void GeneratorConfig::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidArgument, "resolution must be positive");
  if (min_objects < 0 || max_objects < min_objects || max_objects > kMaxObjects) {
    throw Error(ErrorCode::kInvalidArgument, "invalid object count range");
  }
  if (!(min_half_extent > 0.0) || max_half_extent < min_half_extent) {
    throw Error(ErrorCode::kInvalidArgument, "invalid size range");
  }
  if (!(min_depth > kMinObjectDepth) || max_depth < min_depth) {
    throw Error(ErrorCode::kInvalidArgument, "invalid depth range");
  }
  if (!(image_margin >= 0.0 && image_margin < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "image margin must lie in [0, 0.5)");
  }
  if (max_attempts < 1) throw Error(ErrorCode::kInvalidArgument, "max_attempts must be >= 1");
}

Scene sample_scene(std::uint64_t seed, const GeneratorConfig& cfg) {
  cfg.validate();
  CounterRng rng(seed, /*stream=*/1);

  Scene scene;
  scene.camera = CameraIntrinsics::centered(cfg.width, cfg.height);
  scene.background_depth = cfg.background_depth;
  const int count = rng.uniform_int(cfg.min_objects, cfg.max_objects);

  std::vector<ObjectFeature> features;
  features.reserve(count);
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      Primitive prim;
      if (rng.uniform() < cfg.sphere_probability) {
        prim.kind = PrimitiveKind::kSphere;
        const double r = rng.uniform(cfg.min_half_extent, cfg.max_half_extent);
        prim.half_extents = {r, r, r};
      } else {
        prim.kind = PrimitiveKind::kBox;
        for (double& h : prim.half_extents) h = rng.uniform(cfg.min_half_extent, cfg.max_half_extent);
        prim.rotation = random_rotation(rng);
      }
      const double z = rng.uniform(cfg.min_depth, cfg.max_depth);
      const double u = cfg.width * rng.uniform(cfg.image_margin, 1.0 - cfg.image_margin);
      const double v = cfg.height * rng.uniform(cfg.image_margin, 1.0 - cfg.image_margin);
      prim.translation = {(u - scene.camera.ppx) * z / scene.camera.fx,
                          (v - scene.camera.ppy) * z / scene.camera.fy, z};
      for (double& a : prim.albedo) a = rng.uniform(0.2, 1.0);

      if (prim.translation[2] - prim.bounding_radius() <= kMinObjectDepth) continue;
      if (cfg.background_depth &&
          prim.translation[2] + prim.bounding_radius() >= *cfg.background_depth) {
        continue;
      }
      bool ok = true;
      if (cfg.reject_interpenetration) {
        for (const Primitive& other : scene.objects) {
          const Vec3 d{prim.translation[0] - other.translation[0],
                       prim.translation[1] - other.translation[1],
                       prim.translation[2] - other.translation[2]};
          if (std::sqrt(dot(d, d)) < prim.bounding_radius() + other.bounding_radius()) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) continue;
      const ObjectFeature xi = primitive_feature(prim);
      for (const ObjectFeature& f : features) {
        if (geometry::feature_distance(xi, f) < cfg.min_feature_separation) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      scene.objects.push_back(prim);
      features.push_back(xi);
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::kPlacementFailed,
                  "could not place object " + std::to_string(k + 1) + " within " +
                      std::to_string(cfg.max_attempts) + " attempts");
    }
  }
  return scene;
}

PointCloud sample_surface(const Primitive& prim, int count) {
  PointCloud local;
  local.reserve(count);
  const Vec3& h = prim.half_extents;

  if (prim.kind == PrimitiveKind::kSphere) {
    const double r = h[0];
    // Axis extremes are taken in the camera frame so the sample bounds equal
    // the sphere bounds; they are rotated back into the local frame here.
    for (int a = 0; a < 3; ++a) {
      for (double s : {-1.0, 1.0}) {
        Vec3 e{0.0, 0.0, 0.0};
        e[a] = s * r;
        local.push_back(prim.rotation.rotate_inverse(e));
      }
    }
    const int n = std::max(0, count - static_cast<int>(local.size()));
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double y = 1.0 - 2.0 * (i + 0.5) / n;
      const double rad = std::sqrt(std::max(0.0, 1.0 - y * y));
      const double phi = golden * i;
      local.push_back({r * rad * std::cos(phi), r * y, r * rad * std::sin(phi)});
    }
  } else {
    for (int i = 0; i < 8; ++i) {
      local.push_back({(i & 1) ? h[0] : -h[0], (i & 2) ? h[1] : -h[1], (i & 4) ? h[2] : -h[2]});
    }
    const int n = std::max(0, count - 8);
    // Faces: +-x, +-y, +-z, allocated by area with largest remainder.
    std::array<double, 6> area{};
    for (int f = 0; f < 6; ++f) {
      const int axis = f / 2;
      area[f] = 4.0 * h[(axis + 1) % 3] * h[(axis + 2) % 3];
    }
    double total = 0.0;
    for (double a : area) total += a;
    std::array<int, 6> quota{};
    std::array<double, 6> remainder{};
    int assigned = 0;
    for (int f = 0; f < 6; ++f) {
      const double exact = n * area[f] / total;
      quota[f] = static_cast<int>(std::floor(exact));
      remainder[f] = exact - quota[f];
      assigned += quota[f];
    }
    std::array<int, 6> order{0, 1, 2, 3, 4, 5};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (int i = 0; assigned < n; ++i, ++assigned) ++quota[order[i % 6]];

    // R2 low-discrepancy sequence on each face.
    constexpr double kPlastic = 1.32471795724474602596;
    const double a1 = 1.0 / kPlastic;
    const double a2 = 1.0 / (kPlastic * kPlastic);
    for (int f = 0; f < 6; ++f) {
      const int axis = f / 2;
      const double sign = (f % 2 == 0) ? -1.0 : 1.0;
      const int ua = (axis + 1) % 3;
      const int va = (axis + 2) % 3;
      for (int i = 0; i < quota[f]; ++i) {
        const double s = std::fmod(0.5 + a1 * (i + 1), 1.0);
        const double t = std::fmod(0.5 + a2 * (i + 1), 1.0);
        Vec3 p{};
        p[axis] = sign * h[axis];
        p[ua] = (2.0 * s - 1.0) * h[ua];
        p[va] = (2.0 * t - 1.0) * h[va];
        local.push_back(p);
      }
    }
  }

  PointCloud world;
  world.reserve(local.size());
  for (const Vec3& p : local) world.push_back(add(prim.rotation.rotate(p), prim.translation));
  if (prim.kind == PrimitiveKind::kSphere) {
    // Pin the axis extremes exactly; the rotate round trip may perturb them.
    for (int a = 0; a < 3; ++a) {
      for (int s = 0; s < 2; ++s) {
        Vec3 e = prim.translation;
        e[a] += (s == 0 ? -1.0 : 1.0) * h[0];
        world[2 * a + s] = e;
      }
    }
  }
  return world;
}

ObjectFeature primitive_feature(const Primitive& prim) {
  const PointCloud points = sample_surface(prim);
  return geometry::compute_object_feature(points);
}

std::optional<RayHit> intersect(const Primitive& prim, const CameraIntrinsics& camera,
                                double col, double row) noexcept {
  const Vec3 dir{(col - camera.ppx) / camera.fx, (row - camera.ppy) / camera.fy, 1.0};

  if (prim.kind == PrimitiveKind::kSphere) {
    const Vec3& c = prim.translation;
    const double r = prim.half_extents[0];
    const double a = dot(dir, dir);
    const double b = dot(dir, c);
    const double cc = dot(c, c) - r * r;
    const double disc = b * b - a * cc;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    double t = (b - sq) / a;
    if (!(t > 0.0)) t = (b + sq) / a;
    if (!(t > 0.0)) return std::nullopt;
    const Vec3 p = scale(dir, t);
    return RayHit{t, {(p[0] - c[0]) / r, (p[1] - c[1]) / r, (p[2] - c[2]) / r}};
  }

  const Vec3 origin = prim.rotation.rotate_inverse(scale(prim.translation, -1.0));
  const Vec3 d = prim.rotation.rotate_inverse(dir);
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = 0;
  int far_axis = 0;
  for (int a = 0; a < 3; ++a) {
    const double h = prim.half_extents[a];
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(origin[a]) > h) return std::nullopt;
      continue;
    }
    double t0 = (-h - origin[a]) / d[a];
    double t1 = (h - origin[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      near_axis = a;
    }
    if (t1 < t_far) {
      t_far = t1;
      far_axis = a;
    }
  }
  if (t_near > t_far || !(t_far > 0.0)) return std::nullopt;
  const bool entering = t_near > 0.0;
  const double t = entering ? t_near : t_far;
  const int axis = entering ? near_axis : far_axis;
  Vec3 n{0.0, 0.0, 0.0};
  n[axis] = entering ? (d[axis] > 0.0 ? -1.0 : 1.0) : (d[axis] > 0.0 ? 1.0 : -1.0);
  return RayHit{t, prim.rotation.rotate(n)};
}

namespace {

FrameBundle allocate_frame(const Scene& scene) {
  const int h = scene.camera.height;
  const int w = scene.camera.width;
  FrameBundle frame;
  frame.rgb = Grid<double>(h, w, 3, 0.0);
  frame.depth = Grid<double>(h, w, 1, 0.0);
  frame.instance_map = LabelMap(h, w, 1, 0);
  frame.amodal_masks.assign(scene.objects.size(), Mask(h, w, 1, 0));
  return frame;
}

double lambert(const RayHit& hit, const CameraIntrinsics& camera, int col, int row) noexcept {
  const Vec3 dir{(col - camera.ppx) / camera.fx, (row - camera.ppy) / camera.fy, 1.0};
  const double cosine = -dot(hit.normal, dir) / std::sqrt(dot(dir, dir));
  return kAmbient + (1.0 - kAmbient) * std::max(0.0, cosine);
}

// Resolves one pixel given per-object hits (nullopt = miss), instance order.
template <typename HitAt>
void shade_pixel(const Scene& scene, int row, int col, HitAt&& hit_at, FrameBundle& frame) {
  int best = 0;
  RayHit best_hit;
  double best_depth = std::numeric_limits<double>::infinity();
  for (int k = 0; k < scene.object_count(); ++k) {
    const std::optional<RayHit>& hit = hit_at(k);
    if (!hit) continue;
    if (hit->depth < best_depth - kDepthTieTolerance) {
      best = k + 1;
      best_depth = hit->depth;
      best_hit = *hit;
    }
  }
  if (scene.background_depth && best_depth >= *scene.background_depth) {
    best = 0;
  }
  if (best > 0) {
    frame.instance_map(row, col) = best;
    frame.depth(row, col) = best_depth;
    const double shade = lambert(best_hit, scene.camera, col, row);
    const Primitive& prim = scene.objects[best - 1];
    for (int c = 0; c < 3; ++c) frame.rgb(row, col, c) = prim.albedo[c] * shade;
  } else if (scene.background_depth) {
    frame.depth(row, col) = *scene.background_depth;
    for (int c = 0; c < 3; ++c) frame.rgb(row, col, c) = 0.5;
  }
}

void finish_frame(const Scene& scene, FrameBundle& frame) {
  frame.xyz = geometry::depth_to_xyz(frame.depth, scene.camera);
  frame.occlusion_scores.resize(scene.objects.size());
  for (int k = 0; k < scene.object_count(); ++k) {
    frame.occlusion_scores[k] =
        occlusion_score(modal_mask(frame.instance_map, k + 1), frame.amodal_masks[k]);
  }
}

}  // namespace

FrameBundle render(const Scene& scene) {
  scene.validate();
  FrameBundle frame = allocate_frame(scene);
  const int rows = scene.camera.height;
  const int cols = scene.camera.width;
  const int count = scene.object_count();

#pragma omp parallel for schedule(static)
  for (int row = 0; row < rows; ++row) {
    std::vector<std::optional<RayHit>> hits(count);
    for (int col = 0; col < cols; ++col) {
      for (int k = 0; k < count; ++k) {
        hits[k] = intersect(scene.objects[k], scene.camera, col, row);
        if (hits[k]) frame.amodal_masks[k](row, col) = 1;
      }
      shade_pixel(scene, row, col, [&](int k) -> const std::optional<RayHit>& { return hits[k]; },
                  frame);
    }
  }
  finish_frame(scene, frame);
  return frame;
}

FrameBundle render_serial(const Scene& scene) {
  scene.validate();
  FrameBundle frame = allocate_frame(scene);
  const int rows = scene.camera.height;
  const int cols = scene.camera.width;

  // Object k alone: one amodal hit map per object.
  std::vector<std::vector<std::optional<RayHit>>> per_object(scene.objects.size());
  for (int k = 0; k < scene.object_count(); ++k) {
    per_object[k].resize(static_cast<std::size_t>(rows) * cols);
    for (int row = 0; row < rows; ++row) {
      for (int col = 0; col < cols; ++col) {
        auto hit = intersect(scene.objects[k], scene.camera, col, row);
        if (hit) frame.amodal_masks[k](row, col) = 1;
        per_object[k][static_cast<std::size_t>(row) * cols + col] = hit;
      }
    }
  }
  for (int row = 0; row < rows; ++row) {
    for (int col = 0; col < cols; ++col) {
      const std::size_t p = static_cast<std::size_t>(row) * cols + col;
      shade_pixel(scene, row, col,
                  [&](int k) -> const std::optional<RayHit>& { return per_object[k][p]; }, frame);
    }
  }
  finish_frame(scene, frame);
  return frame;
}

double occlusion_score(const Mask& modal, const Mask& amodal) {
  if (!modal.same_extent(amodal) || modal.channels() != amodal.channels()) {
    throw Error(ErrorCode::kDimensionMismatch, "modal and amodal masks differ in shape");
  }
  std::size_t n_modal = 0;
  std::size_t n_amodal = 0;
  for (std::size_t i = 0; i < modal.size(); ++i) {
    const bool m = modal.values()[i] != 0;
    const bool a = amodal.values()[i] != 0;
    if (m && !a) throw Error(ErrorCode::kNotSubset, "modal mask is not a subset of the amodal mask");
    n_modal += m;
    n_amodal += a;
  }
  if (n_amodal == 0) return 0.0;
  return static_cast<double>(n_modal) / static_cast<double>(n_amodal);
}

Mask modal_mask(const LabelMap& instance_map, int label) {
  Mask mask(instance_map.height(), instance_map.width(), 1, 0);
  for (std::size_t i = 0; i < instance_map.size(); ++i) {
    mask.values()[i] = instance_map.values()[i] == label ? 1 : 0;
  }
  return mask;
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }

Vec3 vec_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kInvalidArgument, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["camera"] = {{"fx", scene.camera.fx},       {"fy", scene.camera.fy},
                 {"ppx", scene.camera.ppx},     {"ppy", scene.camera.ppy},
                 {"width", scene.camera.width}, {"height", scene.camera.height}};
  j["background_depth"] = scene.background_depth ? nlohmann::json(*scene.background_depth)
                                                 : nlohmann::json(nullptr);
  nlohmann::json objects = nlohmann::json::array();
  for (const Primitive& p : scene.objects) {
    objects.push_back({{"kind", to_string(p.kind)},
                       {"quaternion_wxyz",
                        nlohmann::json::array({p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z})},
                       {"translation", vec_json(p.translation)},
                       {"half_extents", vec_json(p.half_extents)},
                       {"albedo", vec_json(p.albedo)}});
  }
  j["objects"] = std::move(objects);
  return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    Scene scene;
    const auto& cam = j.at("camera");
    scene.camera.fx = cam.at("fx").get<double>();
    scene.camera.fy = cam.at("fy").get<double>();
    scene.camera.ppx = cam.at("ppx").get<double>();
    scene.camera.ppy = cam.at("ppy").get<double>();
    scene.camera.width = cam.at("width").get<int>();
    scene.camera.height = cam.at("height").get<int>();
    if (j.contains("background_depth") && !j["background_depth"].is_null()) {
      scene.background_depth = j["background_depth"].get<double>();
    }
    for (const auto& o : j.at("objects")) {
      Primitive p;
      p.kind = primitive_kind_from_string(o.at("kind").get<std::string>());
      const auto& q = o.at("quaternion_wxyz");
      if (!q.is_array() || q.size() != 4) throw Error(ErrorCode::kInvalidArgument, "bad quaternion");
      p.rotation = {q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()};
      p.translation = vec_from(o.at("translation"));
      p.half_extents = vec_from(o.at("half_extents"));
      p.albedo = vec_from(o.at("albedo"));
      scene.objects.push_back(p);
    }
    scene.validate();
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed scene JSON: ") + e.what());
  }
}

}  // namespace clusterseg::scenegen
