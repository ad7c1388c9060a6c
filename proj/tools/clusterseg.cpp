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

// clusterseg: scene generation, inference, evaluation, gradient checks and
// training from one binary.

#include <omp.h>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clusterseg/annotation.hpp"
#include "clusterseg/clustering.hpp"
#include "clusterseg/dataio.hpp"
#include "clusterseg/eval.hpp"
#include "clusterseg/losses.hpp"
#include "clusterseg/mlp.hpp"
#include "clusterseg/predictor.hpp"
#include "clusterseg/rng.hpp"
#include "clusterseg/scenegen.hpp"
#include "clusterseg/train.hpp"
#include "json.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace clusterseg::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheckFailed = 3;

constexpr const char* kDatasetManifest = "dataset.json";
constexpr const char* kSegmentationManifest = "segmentation.json";

std::string numbered(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04zu%s", prefix, i, ext);
  return buf;
}

// Runs fn(i) for every frame in parallel; the lowest-index failure is
// rethrown so errors are reported the same way regardless of scheduling.
template <typename Fn>
void for_each_frame(std::size_t n, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::kIo, "cannot create directory " + dir.string());
}

ordered_json parse_json_file(const fs::path& path) {
  const ordered_json j = ordered_json::parse(dataio::read_text(path.string()), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kDataMismatch, path.string() + " is not valid JSON");
  return j;
}

std::vector<std::string> manifest_bundles(const ordered_json& manifest, const fs::path& path) {
  std::vector<std::string> bundles;
  try {
    for (const auto& f : manifest.at("frames")) bundles.push_back(f.at("bundle").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kDataMismatch, path.string() + " has no valid frame list");
  }
  return bundles;
}

struct Dataset {
  fs::path dir;
  std::vector<std::string> bundles;

  std::pair<scenegen::FrameBundle, annotation::Annotation> load(std::size_t i) const {
    return dataio::frame_from_bundle(dataio::read_bundle((dir / bundles[i]).string()));
  }
};

Dataset open_dataset(const fs::path& dir) {
  const fs::path path = dir / kDatasetManifest;
  if (!fs::exists(path)) throw Error(ErrorCode::kIo, "no dataset manifest at " + path.string());
  return Dataset{dir, manifest_bundles(parse_json_file(path), path)};
}

std::pair<int, int> parse_resolution(const std::string& text) {
  int w = 0;
  int h = 0;
  char x = 0;
  std::istringstream is(text);
  if (!(is >> w >> x >> h) || (x != 'x' && x != 'X') || !is.eof()) {
    throw Error(ErrorCode::kInvalidArgument, "resolution must look like WxH, got '" + text + "'");
  }
  return {w, h};
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const int v = std::stoi(text);
      return {v, v};
    }
    std::size_t used = 0;
    const int lo = std::stoi(text.substr(0, dots), &used);
    if (used != dots) throw std::invalid_argument(text);
    const std::string rest = text.substr(dots + 2);
    const int hi = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kInvalidArgument, "object range must look like a..b, got '" + text + "'");
  }
}

train::TrainConfig train_config(const RunConfig& cfg) {
  train::TrainConfig t;
  t.epochs = cfg.train.epochs;
  t.batch_size = cfg.train.batch_size;
  t.seed = cfg.seed;
  t.adam.learning_rate = cfg.train.learning_rate;
  t.adam.beta1 = cfg.train.beta1;
  t.adam.beta2 = cfg.train.beta2;
  t.adam.epsilon = cfg.train.adam_epsilon;
  t.weights = cfg.weights;
  t.schedule_epoch = cfg.train.schedule_epoch;
  t.scheduled_lambda_var = cfg.train.scheduled_lambda_var;
  t.scheduled_lambda_vio = cfg.train.scheduled_lambda_vio;
  t.fg_threshold = cfg.infer.fg_threshold;
  return t;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out;
  std::string resolution;
  std::string objects;
};

int cmd_gen(RunConfig& cfg, const GenArgs& args) {
  if (!args.resolution.empty()) {
    std::tie(cfg.gen.generator.width, cfg.gen.generator.height) = parse_resolution(args.resolution);
  }
  if (!args.objects.empty()) {
    std::tie(cfg.gen.generator.min_objects, cfg.gen.generator.max_objects) = parse_range(args.objects);
  }
  if (cfg.gen.count < 0) throw Error(ErrorCode::kInvalidArgument, "count must be >= 0");
  const double fraction = cfg.gen.candidate_fraction;
  if (!(fraction >= 0.10 && fraction <= 0.30)) {
    throw Error(ErrorCode::kInvalidArgument, "candidate fraction must lie in [0.10, 0.30]");
  }
  cfg.gen.generator.validate();

  const fs::path out(args.out);
  ensure_directory(out);
  const auto n = static_cast<std::size_t>(cfg.gen.count);
  std::vector<int> objects(n);
  for_each_frame(n, [&](std::size_t i) {
    const scenegen::Scene scene = scenegen::sample_scene(derive_seed(cfg.seed, i), cfg.gen.generator);
    const scenegen::FrameBundle frame = scenegen::render(scene);
    annotation::AnnotationConfig acfg;
    acfg.candidate_fraction = fraction;
    const annotation::Annotation ann = annotation::annotate(scene, frame, acfg);
    dataio::write_text((out / numbered("scene", i, ".json")).string(), scenegen::scene_to_json(scene));
    dataio::write_bundle((out / numbered("frame", i, ".tsb")).string(), dataio::frame_to_bundle(frame, ann));
    objects[i] = scene.object_count();
  });

  ordered_json manifest;
  manifest["format"] = "clusterseg-dataset";
  manifest["version"] = 1;
  manifest["seed"] = cfg.seed;
  manifest["count"] = n;
  manifest["width"] = cfg.gen.generator.width;
  manifest["height"] = cfg.gen.generator.height;
  manifest["min_objects"] = cfg.gen.generator.min_objects;
  manifest["max_objects"] = cfg.gen.generator.max_objects;
  manifest["candidate_fraction"] = fraction;
  manifest["frames"] = ordered_json::array();
  for (std::size_t i = 0; i < n; ++i) {
    manifest["frames"].push_back({{"id", i},
                                  {"scene", numbered("scene", i, ".json")},
                                  {"bundle", numbered("frame", i, ".tsb")},
                                  {"objects", objects[i]}});
  }
  dataio::write_text((out / kDatasetManifest).string(), manifest.dump(2) + "\n");
  std::cout << "wrote " << n << " frames to " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string dataset;
  std::string out;
  std::string model;
  std::string sweep_csv;
};

predictor::NoiseSpec noise_spec(const InferSettings& in, const annotation::Annotation& ann) {
  predictor::NoiseSpec spec;
  spec.sigma_xi = in.sigma_xi;
  spec.sigma_b = in.sigma_b;
  spec.sigma_eta = in.sigma_eta;
  spec.flip_rate = in.flip_rate;
  spec.mode = predictor::noise_mode_from_string(in.noise_mode);
  if (in.ball_radius_factor > 0.0) {
    spec.mode = predictor::NoiseMode::kUniformBall;
    spec.ball_radius = in.ball_radius_factor * annotation::min_foreground_radius(ann);
  }
  return spec;
}

double sweep_point(const RunConfig& cfg, const Dataset& data, double sigma) {
  InferSettings in = cfg.infer;
  in.sigma_xi = sigma;
  std::vector<eval::EvalImage> images(data.bundles.size());
  for_each_frame(images.size(), [&](std::size_t i) {
    const auto [frame, ann] = data.load(i);
    const auto pred = predictor::noisy_predict(ann, noise_spec(in, ann), derive_seed(cfg.seed, i));
    const auto seg = clustering::segment(pred, in.fg_threshold);
    images[i] = eval::make_eval_image(frame.instance_map, frame.occlusion_scores, seg);
  });
  return eval::compute_metrics(images).ap;
}

int cmd_infer(RunConfig& cfg, const InferArgs& args) {
  const InferSettings& in = cfg.infer;
  if (in.predictor != "oracle" && in.predictor != "noisy" && in.predictor != "mlp") {
    throw Error(ErrorCode::kInvalidArgument, "predictor must be oracle, noisy or mlp");
  }
  predictor::noise_mode_from_string(in.noise_mode);
  const Dataset data = open_dataset(args.dataset);

  if (!in.sweep_sigmas.empty()) {
    std::ostringstream csv;
    csv << "sigma,ap\n";
    for (double sigma : in.sweep_sigmas) {
      char line[96];
      std::snprintf(line, sizeof(line), "%g,%.17g\n", sigma, sweep_point(cfg, data, sigma));
      csv << line;
    }
    if (!args.sweep_csv.empty()) dataio::write_text(args.sweep_csv, csv.str());
    std::cout << csv.str();
    return kExitOk;
  }
  if (args.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");

  std::optional<mlp::MlpModel> model;
  if (in.predictor == "mlp") {
    if (args.model.empty()) throw Error(ErrorCode::kInvalidArgument, "--model is required for the mlp predictor");
    if (!fs::exists(args.model)) throw Error(ErrorCode::kIo, "model file not found: " + args.model);
    model = mlp::read_checkpoint(args.model).model;
  }

  const fs::path out(args.out);
  ensure_directory(out);
  const std::size_t n = data.bundles.size();
  std::vector<int> instances(n);
  for_each_frame(n, [&](std::size_t i) {
    const auto [frame, ann] = data.load(i);
    clustering::Prediction pred;
    if (in.predictor == "oracle") {
      pred = predictor::oracle_predict(ann);
    } else if (in.predictor == "noisy") {
      pred = predictor::noisy_predict(ann, noise_spec(in, ann), derive_seed(cfg.seed, i));
    } else {
      pred = predictor::to_prediction(mlp::mlp_forward(*model, frame).output);
    }
    const auto seg = clustering::segment(pred, in.fg_threshold);
    dataio::write_bundle((out / numbered("seg", i, ".tsb")).string(), dataio::segmentation_to_bundle(seg));
    instances[i] = seg.instance_count();
  });

  ordered_json manifest;
  manifest["format"] = "clusterseg-segmentation";
  manifest["version"] = 1;
  manifest["predictor"] = in.predictor;
  manifest["count"] = n;
  manifest["frames"] = ordered_json::array();
  for (std::size_t i = 0; i < n; ++i) {
    manifest["frames"].push_back({{"id", i}, {"bundle", numbered("seg", i, ".tsb")}, {"instances", instances[i]}});
  }
  dataio::write_text((out / kSegmentationManifest).string(), manifest.dump(2) + "\n");
  std::cout << "wrote " << n << " segmentations to " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string dataset;
  std::string segs;
  std::string report;
  std::string table;
  std::string label = "model";
};

int cmd_eval(const EvalArgs& args) {
  const Dataset data = open_dataset(args.dataset);
  const fs::path seg_manifest = fs::path(args.segs) / kSegmentationManifest;
  if (!fs::exists(seg_manifest)) throw Error(ErrorCode::kIo, "no segmentation manifest at " + seg_manifest.string());
  const auto seg_bundles = manifest_bundles(parse_json_file(seg_manifest), seg_manifest);
  if (seg_bundles.size() != data.bundles.size()) {
    throw Error(ErrorCode::kDataMismatch, "dataset has " + std::to_string(data.bundles.size()) +
                                              " frames but there are " + std::to_string(seg_bundles.size()) +
                                              " segmentations");
  }
  std::vector<eval::EvalImage> images(seg_bundles.size());
  for_each_frame(images.size(), [&](std::size_t i) {
    const auto [frame, ann] = data.load(i);
    const auto seg = dataio::segmentation_from_bundle(
        dataio::read_bundle((fs::path(args.segs) / seg_bundles[i]).string()));
    images[i] = eval::make_eval_image(frame.instance_map, frame.occlusion_scores, seg);
  });
  const eval::EvalResult result = eval::compute_metrics(images);
  const std::string table = eval::format_table(result, args.label);
  dataio::write_text(args.report, eval::to_json(result) + "\n");
  if (!args.table.empty()) dataio::write_text(args.table, table);
  std::cout << table;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::optional<double> lambda_vio;
  bool corrupt = false;
};

int cmd_gradcheck(RunConfig& cfg, const GradcheckArgs& args) {
  const GradcheckSettings& gc = cfg.gradcheck;
  if (gc.frames < 1 || gc.samples < 1 || gc.size < 2) {
    throw Error(ErrorCode::kInvalidArgument, "frames, samples and size must be positive");
  }
  losses::LossWeights weights = cfg.weights;
  if (args.lambda_vio) weights.lambda_vio = *args.lambda_vio;
  weights.validate();

  scenegen::GeneratorConfig gen = cfg.gen.generator;
  gen.width = gc.size;
  gen.height = gc.size;
  annotation::AnnotationConfig acfg;
  acfg.candidate_fraction = cfg.gen.candidate_fraction;

  losses::GradCheckReport total;
  const int per_frame = (gc.samples + gc.frames - 1) / gc.frames;
  std::vector<losses::GradCheckReport> reports(gc.frames);
  for_each_frame(reports.size(), [&](std::size_t f) {
    const auto scene = scenegen::sample_scene(derive_seed(cfg.seed, f), gen);
    const auto frame = scenegen::render(scene);
    const auto ann = annotation::annotate(scene, frame, acfg);
    const auto raw = predictor::perturbed_raw(ann, derive_seed(cfg.seed, 1000 + f));
    losses::GradCheckOptions opt;
    opt.epsilon = gc.epsilon;
    opt.samples = per_frame;
    opt.seed = derive_seed(cfg.seed, 2000 + f);
    if (args.corrupt) {
      opt.corrupt_gradient = [](losses::RawPrediction& g) {
        for (double& v : g.xi_hat.values()) v *= 1.01;
      };
    }
    reports[f] = losses::finite_diff_check(raw, ann, frame.instance_map, weights, opt);
  });
  for (const auto& r : reports) {
    total.checked += r.checked;
    total.skipped_near_threshold += r.skipped_near_threshold;
    total.mask_coords += r.mask_coords;
    total.eta_coords += r.eta_coords;
    total.b_coords += r.b_coords;
    total.xi_coords += r.xi_coords;
    total.xi_foreground_coords += r.xi_foreground_coords;
    total.xi_violating_coords += r.xi_violating_coords;
    if (r.max_rel_error >= total.max_rel_error) {
      total.max_rel_error = r.max_rel_error;
      total.worst = r.worst;
    }
  }
  const bool pass = total.max_rel_error < gc.tolerance;
  char line[160];
  std::snprintf(line, sizeof(line), "max_rel_error %.6e (tolerance %.1e) over %d coordinates\n",
                total.max_rel_error, gc.tolerance, total.checked);
  std::cout << line;
  std::cout << "coordinates: mask " << total.mask_coords << ", eta " << total.eta_coords << ", b "
            << total.b_coords << ", xi " << total.xi_coords << " (foreground " << total.xi_foreground_coords
            << ", violating " << total.xi_violating_coords << "), skipped near threshold "
            << total.skipped_near_threshold << "\n";
  std::cout << "worst: " << total.worst << "\n";
  std::cout << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::string out;
  std::string log;
  std::string resume;
};

int cmd_train(RunConfig& cfg, const TrainArgs& args) {
  const train::TrainConfig tcfg = train_config(cfg);
  tcfg.validate();
  const Dataset data = open_dataset(args.dataset);
  if (data.bundles.empty()) throw Error(ErrorCode::kEmptyInput, "dataset is empty");

  std::vector<train::Sample> samples(data.bundles.size());
  for_each_frame(samples.size(), [&](std::size_t i) {
    auto [frame, ann] = data.load(i);
    samples[i] = train::make_sample(std::move(frame), std::move(ann));
  });

  mlp::Checkpoint state;
  if (!args.resume.empty()) {
    state = mlp::read_checkpoint(args.resume);
  } else {
    state.model = mlp::MlpModel::initialized(cfg.seed);
  }
  const std::string log_path = args.log.empty() ? args.out + ".csv" : args.log;
  const bool append = !args.resume.empty() && state.epochs_completed > 0 && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw Error(ErrorCode::kIo, "cannot open " + log_path);
  if (!append) log << train::csv_header() << "\n";
  std::cout << train::csv_header() << "\n";

  train::run_training(state, samples, tcfg, [&](const train::EpochLog& row, const mlp::Checkpoint& ck) {
    const std::string line = train::csv_row(row);
    log << line << "\n";
    log.flush();
    std::cout << line << "\n" << std::flush;
    if (row.epoch > 0) mlp::write_checkpoint(args.out, ck);
  });
  mlp::write_checkpoint(args.out, state);
  if (!log) throw Error(ErrorCode::kIo, "write failed: " + log_path);
  return kExitOk;
}

// ---------------------------------------------------------------------------

std::optional<std::string> find_config_flag(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return std::nullopt;
}

int run(int argc, char** argv) {
  RunConfig cfg;
  if (const auto path = find_config_flag(argc, argv)) {
    cfg = run_config_from_json(dataio::read_text(*path));
  }

  CLI::App app{"clusterseg: proposal-free RGB-D instance segmentation toolkit"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration; command-line flags override its values");
  app.add_option("--seed", cfg.seed, "Master seed for all randomness");
  app.add_option("--jobs", cfg.jobs, "Worker threads for frame-level parallelism (0 = OpenMP default)")
      ->envname("CLUSTERSEG_JOBS")
      ->check(CLI::NonNegativeNumber);

  auto* config = app.add_subcommand("config", "Print the effective run configuration as JSON");
  std::string config_out;
  config->add_option("--out", config_out, "Write the configuration here instead of stdout");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset of scenes, frames and annotations");
  gen->add_option("--count", cfg.gen.count, "Number of frames");
  gen->add_option("--out", gen_args.out, "Output directory")->required();
  gen_args.resolution = std::to_string(cfg.gen.generator.width) + "x" + std::to_string(cfg.gen.generator.height);
  gen->add_option("--res", gen_args.resolution, "Resolution WxH");
  gen_args.objects = std::to_string(cfg.gen.generator.min_objects) + ".." +
                     std::to_string(cfg.gen.generator.max_objects);
  gen->add_option("--objects", gen_args.objects, "Objects per scene, a..b inclusive");
  gen->add_option("--fraction", cfg.gen.candidate_fraction, "Centroid-candidate fraction per object");

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "Segment every frame of a dataset");
  infer->add_option("--dataset", infer_args.dataset, "Dataset directory")->required();
  infer->add_option("--predictor", cfg.infer.predictor, "oracle | noisy | mlp")
      ->check(CLI::IsMember({"oracle", "noisy", "mlp"}));
  infer->add_option("--model", infer_args.model, "Checkpoint for the mlp predictor");
  infer->add_option("--out", infer_args.out, "Output directory for segmentation bundles");
  infer->add_option("--sigma-xi", cfg.infer.sigma_xi, "Feature noise scale");
  infer->add_option("--sigma-b", cfg.infer.sigma_b, "Radius noise scale");
  infer->add_option("--sigma-eta", cfg.infer.sigma_eta, "Centroid-probability noise scale");
  infer->add_option("--flip-rate", cfg.infer.flip_rate, "Per-pixel mask flip probability");
  infer->add_option("--noise-mode", cfg.infer.noise_mode, "gaussian | uniform-ball");
  infer->add_option("--ball-radius-factor", cfg.infer.ball_radius_factor,
                    "Uniform-ball feature noise radius as a multiple of the frame's smallest B");
  infer->add_option("--fg-threshold", cfg.infer.fg_threshold, "Foreground probability threshold");
  infer->add_option("--sweep", cfg.infer.sweep_sigmas, "Comma-separated feature noise scales; prints sigma,AP CSV")
      ->delimiter(',');
  infer->add_option("--sweep-csv", infer_args.sweep_csv, "Also write the sweep CSV here");

  EvalArgs eval_args;
  auto* evalc = app.add_subcommand("eval", "Score segmentations against a dataset");
  evalc->add_option("--dataset", eval_args.dataset, "Dataset directory")->required();
  evalc->add_option("--segs", eval_args.segs, "Segmentation directory")->required();
  evalc->add_option("--report", eval_args.report, "JSON report path")->required();
  evalc->add_option("--table", eval_args.table, "Also write the text table here");
  evalc->add_option("--label", eval_args.label, "Row label of the text table");

  GradcheckArgs gc_args;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic loss gradients with finite differences");
  gradcheck->add_option("--samples", cfg.gradcheck.samples, "Coordinates to check in total");
  gradcheck->add_option("--frames", cfg.gradcheck.frames, "Random frames");
  gradcheck->add_option("--size", cfg.gradcheck.size, "Frame side length in pixels");
  gradcheck->add_option("--epsilon", cfg.gradcheck.epsilon, "Central-difference step");
  gradcheck->add_option("--tolerance", cfg.gradcheck.tolerance, "Maximum accepted relative error");
  gradcheck->add_option("--lambda-vio", gc_args.lambda_vio, "Override the violation-loss weight");
  gradcheck->add_flag("--corrupt-gradient", gc_args.corrupt)->group("");

  TrainArgs train_args;
  auto* trainc = app.add_subcommand("train", "Train the per-pixel MLP predictor");
  trainc->add_option("--dataset", train_args.dataset, "Dataset directory")->required();
  trainc->add_option("--out", train_args.out, "Checkpoint path")->required();
  trainc->add_option("--log", train_args.log, "Per-epoch CSV log (default: <out>.csv)");
  trainc->add_option("--resume", train_args.resume, "Continue from this checkpoint");
  trainc->add_option("--epochs", cfg.train.epochs, "Total epochs");
  trainc->add_option("--batch", cfg.train.batch_size, "Frames per Adam step");
  trainc->add_option("--lr", cfg.train.learning_rate, "Adam learning rate");
  trainc->add_option("--schedule-epoch", cfg.train.schedule_epoch,
                     "Epoch after which lambda_var and lambda_vio switch to their scheduled values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);

  if (config->parsed()) {
    if (config_out.empty()) {
      std::cout << to_json(cfg);
    } else {
      dataio::write_text(config_out, to_json(cfg));
    }
    return kExitOk;
  }
  if (gen->parsed()) return cmd_gen(cfg, gen_args);
  if (infer->parsed()) return cmd_infer(cfg, infer_args);
  if (evalc->parsed()) return cmd_eval(eval_args);
  if (gradcheck->parsed()) return cmd_gradcheck(cfg, gc_args);
  return cmd_train(cfg, train_args);
}

}  // namespace
}  // namespace clusterseg::cli

int main(int argc, char** argv) {
  try {
    return clusterseg::cli::run(argc, argv);
  } catch (const clusterseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == clusterseg::ErrorCode::kInvalidArgument ? clusterseg::cli::kExitUsage
                                                                : clusterseg::cli::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return clusterseg::cli::kExitData;
  }
}
