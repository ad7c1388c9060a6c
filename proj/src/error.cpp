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

#include "clusterseg/error.hpp"

namespace clusterseg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kPlacementFailed: return "placement failed";
    case ErrorCode::kNotSubset: return "not a subset";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kDuplicateName: return "duplicate name";
    case ErrorCode::kCorruptManifest: return "corrupt manifest";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kUnsupportedDtype: return "unsupported dtype";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kDataMismatch: return "data mismatch";
  }
  return "unknown error";
}

}  // namespace clusterseg
