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

#ifndef PATCHFUSE_METRICS_H_
#define PATCHFUSE_METRICS_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchfuse/fusion.h"

namespace patchfuse {

struct Prediction {
  std::string image_id;
  std::string patient_id;
  int true_label = 0;
  int predicted_label = 0;
  int magnification = 40;
};

// Fraction of correctly classified images. Throws Error(kInvalidArgument)
// on empty input.
double ImageAccuracy(std::span<const Prediction> predictions);

// Unweighted mean over patients of each patient's image accuracy.
double PatientAccuracy(std::span<const Prediction> predictions);

// "non-split", "quarter-split", "16-way-split" for levels 1, 2, 3.
std::string SegmentationName(int level);

// One experiment configuration. Level 1 has no fusion rule.
struct ConfigurationKey {
  int magnification = 40;
  int level = 1;
  std::optional<FusionRule> rule;

  friend bool operator==(const ConfigurationKey&,
                         const ConfigurationKey&) = default;
};

struct PredictionGroup {
  ConfigurationKey key;
  std::vector<Prediction> predictions;
};

struct ReportRow {
  ConfigurationKey key;
  double image_accuracy = 0.0;
  double patient_accuracy = 0.0;
  int n_images = 0;
  int n_correct = 0;
  int n_patients = 0;
  // Malignant (1) is the positive class.
  int true_positive = 0;
  int true_negative = 0;
  int false_positive = 0;
  int false_negative = 0;
};

struct EvaluationReport {
  // Ordered by level, fusion rule (sum, product, max), magnification.
  std::vector<ReportRow> rows;

  // magnification,segmentation,fusion,image_accuracy,patient_accuracy,
  // n_images,n_correct,n_patients -- accuracies as percentages.
  std::string ToCsv() const;
  // Confusion counts per configuration.
  std::string ConfusionCsv() const;
  // Configurations as rows, magnifications as columns; one block for image
  // level and one for patient level.
  std::string ToTable() const;
};

// Throws Error(kInvalidArgument) for an empty group or a repeated key.
EvaluationReport BuildReport(std::span<const PredictionGroup> groups);

// Accuracy in [0, 1] as a percentage with one decimal: 0.928 -> "92.8".
std::string FormatPercent(double accuracy);

}  // namespace patchfuse

#endif  // PATCHFUSE_METRICS_H_
