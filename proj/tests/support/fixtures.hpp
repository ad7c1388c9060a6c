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
#include <string>

#include "clusterseg/annotation.hpp"
#include "clusterseg/scenegen.hpp"

namespace clusterseg::testing {

struct SceneCase {
  scenegen::Scene scene;
  scenegen::FrameBundle frame;
  annotation::Annotation ann;
};

scenegen::GeneratorConfig generator(int size, int min_objects, int max_objects);
SceneCase make_case(std::uint64_t seed, const scenegen::GeneratorConfig& cfg);

// True when the two label maps induce the same partition: identical
// background and a bijection between their labels.
bool same_partition(const LabelMap& a, const LabelMap& b);

// Fresh empty directory under the system temp path.
std::string fresh_dir(const std::string& name);

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr
};
CommandResult run_command(const std::string& command);

std::string slurp(const std::string& path);

}  // namespace clusterseg::testing
