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

#ifndef PATCHFUSE_FUSION_H_
#define PATCHFUSE_FUSION_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patchfuse/head.h"

namespace patchfuse {

enum class FusionRule { kSum, kProduct, kMax };

inline constexpr FusionRule kAllFusionRules[] = {
    FusionRule::kSum, FusionRule::kProduct, FusionRule::kMax};

// "sum" | "product" | "max"
std::string_view FusionRuleName(FusionRule rule);
// Throws Error(kInvalidArgument) for unknown names.
FusionRule ParseFusionRule(std::string_view name);
// Comma-separated list, e.g. "sum,max". Duplicates are rejected.
std::vector<FusionRule> ParseFusionRules(std::string_view list);

struct FusionDecision {
  int predicted_class = 0;
  // Sum: sum of probabilities. Product: product of floored probabilities.
  // Max: maximum.
  std::vector<double> scores;
  // Natural log of the product-rule scores; empty for the other rules. The
  // product decision uses these only when a direct product is subnormal.
  std::vector<double> log_scores;
  FusionRule rule = FusionRule::kSum;
  int n_patches = 0;

  friend bool operator==(const FusionDecision&, const FusionDecision&) = default;
};

// Aggregates per-patch class probabilities and picks the class with the
// highest aggregate score; exact ties go to the lowest class index. Per-class
// values are combined in sorted order, so the result does not depend on the
// order of `patch_probs`. Throws Error(kInvalidArgument) for an empty list or
// vectors of differing length.
FusionDecision Fuse(std::span<const ProbabilityVector> patch_probs,
                    FusionRule rule);

// Index of the largest value, lowest index on ties.
int ArgMax(std::span<const double> values);

}  // namespace patchfuse

#endif  // PATCHFUSE_FUSION_H_
