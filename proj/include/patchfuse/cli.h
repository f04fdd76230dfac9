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

#ifndef PATCHFUSE_CLI_H_
#define PATCHFUSE_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace patchfuse {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,        // usage errors, validation failures, I/O problems
  kExitMissingData = 3,  // missing cache entries, empty splits
  kExitNumerical = 4,    // training divergence
};

// Runs the `patchfuse` command line. Data goes to files or `out`, messages
// to `err`.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace patchfuse

#endif  // PATCHFUSE_CLI_H_
