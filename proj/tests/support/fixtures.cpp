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

#include "fixtures.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <unistd.h>

namespace clusterseg::testing {

scenegen::GeneratorConfig generator(int size, int min_objects, int max_objects) {
  scenegen::GeneratorConfig cfg;
  cfg.width = size;
  cfg.height = size;
  cfg.min_objects = min_objects;
  cfg.max_objects = max_objects;
  return cfg;
}

SceneCase make_case(std::uint64_t seed, const scenegen::GeneratorConfig& cfg) {
  SceneCase c;
  c.scene = scenegen::sample_scene(seed, cfg);
  c.frame = scenegen::render(c.scene);
  c.ann = annotation::annotate(c.scene, c.frame);
  return c;
}

bool same_partition(const LabelMap& a, const LabelMap& b) {
  if (!a.same_extent(b)) return false;
  std::map<int, int> forward;
  std::map<int, int> backward;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    const int x = a.at(p);
    const int y = b.at(p);
    if ((x == 0) != (y == 0)) return false;
    if (x == 0) continue;
    const auto [fit, fnew] = forward.emplace(x, y);
    const auto [bit, bnew] = backward.emplace(y, x);
    if (fit->second != y || bit->second != x) return false;
  }
  return true;
}

std::string fresh_dir(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("clusterseg_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

CommandResult run_command(const std::string& command) {
  CommandResult r;
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace clusterseg::testing
