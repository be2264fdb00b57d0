// Copyright 2026 The fairrank Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fairrank/error.h"

namespace fairrank {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kEmptyAfterFilter: return "empty-after-filter";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kTraining: return "training";
    case ErrorCode::kSingularSystem: return "singular-system";
    case ErrorCode::kResolution: return "resolution";
    case ErrorCode::kDegenerateGrouping: return "degenerate-grouping";
    case ErrorCode::kInfeasibleProblem: return "infeasible-problem";
    case ErrorCode::kInfeasibleEpsilon: return "infeasible-epsilon";
    case ErrorCode::kSizeGuard: return "size-guard";
    case ErrorCode::kUndefined: return "undefined";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kPrecondition:
      return 2;
    case ErrorCode::kParse:
    case ErrorCode::kEmptyDataset:
    case ErrorCode::kEmptyAfterFilter:
    case ErrorCode::kResolution:
    case ErrorCode::kDegenerateGrouping:
    case ErrorCode::kIo:
    case ErrorCode::kTraining:
    case ErrorCode::kSingularSystem:
    case ErrorCode::kUndefined:
      return 3;
    case ErrorCode::kInfeasibleProblem:
    case ErrorCode::kInfeasibleEpsilon:
      return 4;
    case ErrorCode::kSizeGuard:
    case ErrorCode::kInternal:
      return 5;
  }
  return 5;
}

}  // namespace fairrank
