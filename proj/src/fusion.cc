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

#include "patchfuse/fusion.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "patchfuse/error.h"

namespace patchfuse {

std::string_view FusionRuleName(FusionRule rule) {
  switch (rule) {
    case FusionRule::kSum:
      return "sum";
    case FusionRule::kProduct:
      return "product";
    case FusionRule::kMax:
      return "max";
  }
  return "unknown";
}

FusionRule ParseFusionRule(std::string_view name) {
  for (FusionRule rule : kAllFusionRules) {
    if (FusionRuleName(rule) == name) return rule;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown fusion rule '" + std::string(name) +
                  "' (expected sum, product or max)");
}

std::vector<FusionRule> ParseFusionRules(std::string_view list) {
  std::vector<FusionRule> rules;
  size_t start = 0;
  while (start <= list.size()) {
    size_t comma = list.find(',', start);
    if (comma == std::string_view::npos) comma = list.size();
    const FusionRule rule = ParseFusionRule(list.substr(start, comma - start));
    if (std::find(rules.begin(), rules.end(), rule) != rules.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "fusion rule listed twice: " +
                      std::string(FusionRuleName(rule)));
    }
    rules.push_back(rule);
    start = comma + 1;
  }
  return rules;
}

int ArgMax(std::span<const double> values) {
  int best = 0;
  for (size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = static_cast<int>(k);
  }
  return best;
}

FusionDecision Fuse(std::span<const ProbabilityVector> patch_probs,
                    FusionRule rule) {
  if (patch_probs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot fuse an empty patch list");
  }
  const size_t classes = patch_probs.front().size();
  if (classes == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty probability vector");
  }
  for (const ProbabilityVector& p : patch_probs) {
    if (p.size() != classes) {
      throw Error(ErrorCode::kInvalidArgument,
                  "probability vectors of differing length");
    }
  }

  FusionDecision d;
  d.rule = rule;
  d.n_patches = static_cast<int>(patch_probs.size());
  d.scores.resize(classes);
  std::vector<double> column(patch_probs.size());
  for (size_t k = 0; k < classes; ++k) {
    for (size_t i = 0; i < patch_probs.size(); ++i) column[i] = patch_probs[i][k];
    std::sort(column.begin(), column.end());
    switch (rule) {
      case FusionRule::kSum: {
        double s = 0.0;
        for (double v : column) s += v;
        d.scores[k] = s;
        break;
      }
      case FusionRule::kProduct: {
        double log_sum = 0.0;
        double product = 1.0;
        for (double v : column) {
          const double floored = std::max(v, kProbabilityFloor);
          log_sum += std::log(floored);
          product *= floored;
        }
        d.log_scores.push_back(log_sum);
        d.scores[k] = product;
        break;
      }
      case FusionRule::kMax:
        d.scores[k] = column.back();
        break;
    }
  }
  bool use_logs = false;
  if (rule == FusionRule::kProduct) {
    for (size_t k = 0; k < classes; ++k) {
      if (d.scores[k] < std::numeric_limits<double>::min()) {
        use_logs = true;
        d.scores[k] = std::exp(d.log_scores[k]);
      }
    }
  }
  d.predicted_class = ArgMax(use_logs ? d.log_scores : d.scores);
  return d;
}

}  // namespace patchfuse
