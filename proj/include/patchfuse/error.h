// Copyright 2026 The patchfuse Authors
// SPDX-License-Identifier: Apache-2.0
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

#ifndef PATCHFUSE_ERROR_H_
#define PATCHFUSE_ERROR_H_

#include <stdexcept>
#include <string>

namespace patchfuse {

// Failure categories. The CLI maps these onto its exit-code contract.
enum class ErrorCode {
  kInvalidArgument,  // bad flag values, out-of-range parameters
  kFormat,           // malformed file contents
  kIo,               // unreadable/unwritable paths
  kMissingData,      // required ids/records absent
  kNumerical,        // divergence, non-finite values
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace patchfuse

#endif  // PATCHFUSE_ERROR_H_
