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

#include <stdexcept>
#include <string>

namespace clusterseg {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kEmptyInput,
  kPlacementFailed,
  kNotSubset,
  kNonFinite,
  kShapeMismatch,
  kIo,
  kDuplicateName,
  kCorruptManifest,
  kTruncated,
  kUnsupportedDtype,
  kBadMagic,
  kDataMismatch,
};

const char* to_string(ErrorCode code);

// All library failures surface as this type; `code()` lets callers branch
// without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace clusterseg
