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

#include "run_config.hpp"

#include <set>

#include "clusterseg/error.hpp"
#include "json.hpp"

namespace clusterseg::cli {

namespace {

using nlohmann::ordered_json;

// Reads the keys of one JSON section into fields, rejecting keys that no
// field claims.
class Section {
 public:
  Section(const ordered_json& j, std::string name) : json_(j), name_(std::move(name)) {
    if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& field) {
    known_.insert(key);
    const auto it = json_.find(key);
    if (it == json_.end()) return;
    try {
      field = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  void read_optional(const char* key, std::optional<double>& field) {
    known_.insert(key);
    const auto it = json_.find(key);
    if (it == json_.end()) return;
    if (it->is_null()) {
      field.reset();
    } else if (it->is_number()) {
      field = it->get<double>();
    } else {
      throw Error(ErrorCode::kInvalidArgument, "config key '" + name_ + "." + key + "' must be a number or null");
    }
  }

  const ordered_json& child(const char* key) {
    known_.insert(key);
    static const ordered_json kEmpty = ordered_json::object();
    const auto it = json_.find(key);
    return it == json_.end() ? kEmpty : *it;
  }

  void finish() const {
    for (const auto& [key, value] : json_.items()) {
      if (!known_.count(key)) throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  const ordered_json& json_;
  std::string name_;
  std::set<std::string> known_;
};

}  // namespace

std::string to_json(const RunConfig& cfg) {
  const auto& g = cfg.gen.generator;
  ordered_json j;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["gen"] = {{"count", cfg.gen.count},
              {"width", g.width},
              {"height", g.height},
              {"min_objects", g.min_objects},
              {"max_objects", g.max_objects},
              {"min_half_extent", g.min_half_extent},
              {"max_half_extent", g.max_half_extent},
              {"min_depth", g.min_depth},
              {"max_depth", g.max_depth},
              {"image_margin", g.image_margin},
              {"sphere_probability", g.sphere_probability},
              {"min_feature_separation", g.min_feature_separation},
              {"reject_interpenetration", g.reject_interpenetration},
              {"max_attempts", g.max_attempts},
              {"background_depth", g.background_depth ? ordered_json(*g.background_depth) : ordered_json()},
              {"candidate_fraction", cfg.gen.candidate_fraction}};
  const auto& in = cfg.infer;
  j["infer"] = {{"predictor", in.predictor},
                {"sigma_xi", in.sigma_xi},
                {"sigma_b", in.sigma_b},
                {"sigma_eta", in.sigma_eta},
                {"flip_rate", in.flip_rate},
                {"noise_mode", in.noise_mode},
                {"ball_radius_factor", in.ball_radius_factor},
                {"fg_threshold", in.fg_threshold},
                {"sweep_sigmas", in.sweep_sigmas}};
  const auto& w = cfg.weights;
  j["weights"] = {{"lambda_s", w.lambda_s},     {"lambda_cen", w.lambda_cen}, {"lambda_var", w.lambda_var},
                  {"lambda_vio", w.lambda_vio}, {"lambda_xi", w.lambda_xi},   {"lambda_b", w.lambda_b},
                  {"lambda_p", w.lambda_p},     {"lambda_v", w.lambda_v}};
  const auto& t = cfg.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"adam_epsilon", t.adam_epsilon},
                {"schedule_epoch", t.schedule_epoch},
                {"scheduled_lambda_var", t.scheduled_lambda_var},
                {"scheduled_lambda_vio", t.scheduled_lambda_vio}};
  const auto& c = cfg.gradcheck;
  j["gradcheck"] = {{"frames", c.frames},
                    {"size", c.size},
                    {"samples", c.samples},
                    {"epsilon", c.epsilon},
                    {"tolerance", c.tolerance}};
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  const ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kInvalidArgument, "config is not valid JSON");
  RunConfig cfg;
  Section root(j, "config");
  root.read("seed", cfg.seed);
  root.read("jobs", cfg.jobs);

  Section gen(root.child("gen"), "gen");
  auto& g = cfg.gen.generator;
  gen.read("count", cfg.gen.count);
  gen.read("width", g.width);
  gen.read("height", g.height);
  gen.read("min_objects", g.min_objects);
  gen.read("max_objects", g.max_objects);
  gen.read("min_half_extent", g.min_half_extent);
  gen.read("max_half_extent", g.max_half_extent);
  gen.read("min_depth", g.min_depth);
  gen.read("max_depth", g.max_depth);
  gen.read("image_margin", g.image_margin);
  gen.read("sphere_probability", g.sphere_probability);
  gen.read("min_feature_separation", g.min_feature_separation);
  gen.read("reject_interpenetration", g.reject_interpenetration);
  gen.read("max_attempts", g.max_attempts);
  gen.read_optional("background_depth", g.background_depth);
  gen.read("candidate_fraction", cfg.gen.candidate_fraction);
  gen.finish();

  Section infer(root.child("infer"), "infer");
  auto& in = cfg.infer;
  infer.read("predictor", in.predictor);
  infer.read("sigma_xi", in.sigma_xi);
  infer.read("sigma_b", in.sigma_b);
  infer.read("sigma_eta", in.sigma_eta);
  infer.read("flip_rate", in.flip_rate);
  infer.read("noise_mode", in.noise_mode);
  infer.read("ball_radius_factor", in.ball_radius_factor);
  infer.read("fg_threshold", in.fg_threshold);
  infer.read("sweep_sigmas", in.sweep_sigmas);
  infer.finish();

  Section weights(root.child("weights"), "weights");
  auto& w = cfg.weights;
  weights.read("lambda_s", w.lambda_s);
  weights.read("lambda_cen", w.lambda_cen);
  weights.read("lambda_var", w.lambda_var);
  weights.read("lambda_vio", w.lambda_vio);
  weights.read("lambda_xi", w.lambda_xi);
  weights.read("lambda_b", w.lambda_b);
  weights.read("lambda_p", w.lambda_p);
  weights.read("lambda_v", w.lambda_v);
  weights.finish();

  Section train(root.child("train"), "train");
  auto& t = cfg.train;
  train.read("epochs", t.epochs);
  train.read("batch_size", t.batch_size);
  train.read("learning_rate", t.learning_rate);
  train.read("beta1", t.beta1);
  train.read("beta2", t.beta2);
  train.read("adam_epsilon", t.adam_epsilon);
  train.read("schedule_epoch", t.schedule_epoch);
  train.read("scheduled_lambda_var", t.scheduled_lambda_var);
  train.read("scheduled_lambda_vio", t.scheduled_lambda_vio);
  train.finish();

  Section check(root.child("gradcheck"), "gradcheck");
  auto& c = cfg.gradcheck;
  check.read("frames", c.frames);
  check.read("size", c.size);
  check.read("samples", c.samples);
  check.read("epsilon", c.epsilon);
  check.read("tolerance", c.tolerance);
  check.finish();

  root.finish();
  return cfg;
}

}  // namespace clusterseg::cli
