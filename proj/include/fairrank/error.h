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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fairrank {

enum class ErrorCode {
  kParse,
  kEmptyDataset,
  kEmptyAfterFilter,
  kPrecondition,
  kTraining,
  kSingularSystem,
  kResolution,
  kDegenerateGrouping,
  kInfeasibleProblem,
  kInfeasibleEpsilon,
  kSizeGuard,
  kUndefined,
  kConfig,
  kIo,
  kInternal,
};

std::string_view ErrorCodeName(ErrorCode code);

// Process exit status for the CLI: 2 config, 3 data, 4 solver infeasibility,
// 5 internal.
int ExitCodeFor(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Throws Error(kPrecondition) when `condition` is false.
inline void Require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::kPrecondition, message);
}

}  // namespace fairrank
