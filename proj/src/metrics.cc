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

#include "patchfuse/metrics.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "patchfuse/error.h"

namespace patchfuse {
namespace {

void RequireNonEmpty(std::span<const Prediction> predictions) {
  if (predictions.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no predictions to evaluate");
  }
}

int RuleOrder(const std::optional<FusionRule>& rule) {
  return rule ? static_cast<int>(*rule) + 1 : 0;
}

std::string FusionLabel(const ConfigurationKey& key) {
  return key.rule ? std::string(FusionRuleName(*key.rule)) : "-";
}

auto SortKey(const ConfigurationKey& k) {
  return std::make_tuple(k.level, RuleOrder(k.rule), k.magnification);
}

}  // namespace

double ImageAccuracy(std::span<const Prediction> predictions) {
  RequireNonEmpty(predictions);
  size_t correct = 0;
  for (const Prediction& p : predictions) {
    if (p.predicted_label == p.true_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double PatientAccuracy(std::span<const Prediction> predictions) {
  RequireNonEmpty(predictions);
  // patient -> (correct, total)
  std::map<std::string, std::pair<int, int>> per_patient;
  for (const Prediction& p : predictions) {
    auto& [correct, total] = per_patient[p.patient_id];
    correct += p.predicted_label == p.true_label ? 1 : 0;
    ++total;
  }
  double sum = 0.0;
  for (const auto& [patient, counts] : per_patient) {
    sum += static_cast<double>(counts.first) / counts.second;
  }
  return sum / static_cast<double>(per_patient.size());
}

std::string SegmentationName(int level) {
  switch (level) {
    case 1:
      return "non-split";
    case 2:
      return "quarter-split";
    case 3:
      return "16-way-split";
  }
  return "level-" + std::to_string(level);
}

std::string FormatPercent(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", accuracy * 100.0);
  return buf;
}

EvaluationReport BuildReport(std::span<const PredictionGroup> groups) {
  EvaluationReport report;
  for (const PredictionGroup& g : groups) {
    if (g.predictions.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "configuration " + SegmentationName(g.key.level) + "/" +
                      FusionLabel(g.key) + " at " +
                      std::to_string(g.key.magnification) +
                      "X has no predictions");
    }
    ReportRow row;
    row.key = g.key;
    if (row.key.level == 1) row.key.rule.reset();
    for (const ReportRow& existing : report.rows) {
      if (existing.key == row.key) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate report configuration");
      }
    }
    row.image_accuracy = ImageAccuracy(g.predictions);
    row.patient_accuracy = PatientAccuracy(g.predictions);
    row.n_images = static_cast<int>(g.predictions.size());
    std::set<std::string> patients;
    for (const Prediction& p : g.predictions) {
      patients.insert(p.patient_id);
      const bool correct = p.predicted_label == p.true_label;
      row.n_correct += correct ? 1 : 0;
      if (p.true_label == 1) {
        (correct ? row.true_positive : row.false_negative)++;
      } else {
        (correct ? row.true_negative : row.false_positive)++;
      }
    }
    row.n_patients = static_cast<int>(patients.size());
    report.rows.push_back(row);
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ReportRow& a, const ReportRow& b) {
                     return SortKey(a.key) < SortKey(b.key);
                   });
  return report;
}

std::string EvaluationReport::ToCsv() const {
  std::ostringstream out;
  out << "magnification,segmentation,fusion,image_accuracy,patient_accuracy,"
         "n_images,n_correct,n_patients\n";
  for (const ReportRow& r : rows) {
    out << r.key.magnification << ',' << SegmentationName(r.key.level) << ','
        << FusionLabel(r.key) << ',' << FormatPercent(r.image_accuracy) << ','
        << FormatPercent(r.patient_accuracy) << ',' << r.n_images << ','
        << r.n_correct << ',' << r.n_patients << '\n';
  }
  return out.str();
}

std::string EvaluationReport::ConfusionCsv() const {
  std::ostringstream out;
  out << "magnification,segmentation,fusion,true_positive,true_negative,"
         "false_positive,false_negative\n";
  for (const ReportRow& r : rows) {
    out << r.key.magnification << ',' << SegmentationName(r.key.level) << ','
        << FusionLabel(r.key) << ',' << r.true_positive << ','
        << r.true_negative << ',' << r.false_positive << ','
        << r.false_negative << '\n';
  }
  return out.str();
}

std::string EvaluationReport::ToTable() const {
  std::vector<std::pair<int, std::optional<FusionRule>>> configs;
  std::set<int> mags;
  for (const ReportRow& r : rows) {
    mags.insert(r.key.magnification);
    const auto config = std::make_pair(r.key.level, r.key.rule);
    if (std::find(configs.begin(), configs.end(), config) == configs.end()) {
      configs.push_back(config);
    }
  }
  auto cell = [&](int level, const std::optional<FusionRule>& rule, int mag,
                  bool image_level) -> std::string {
    for (const ReportRow& r : rows) {
      if (r.key.level == level && r.key.rule == rule &&
          r.key.magnification == mag) {
        return FormatPercent(image_level ? r.image_accuracy
                                         : r.patient_accuracy);
      }
    }
    return "";
  };

  std::ostringstream out;
  char buf[64];
  for (bool image_level : {true, false}) {
    out << (image_level ? "Image level" : "Patient level") << '\n';
    std::snprintf(buf, sizeof(buf), "%-14s %-8s", "Segmentation", "Fusion");
    out << buf;
    for (int m : mags) {
      std::snprintf(buf, sizeof(buf), " %7s", (std::to_string(m) + "X").c_str());
      out << buf;
    }
    out << '\n';
    int previous_level = 0;
    for (const auto& [level, rule] : configs) {
      const std::string seg = level != previous_level ? SegmentationName(level) : "";
      previous_level = level;
      const std::string fusion = rule ? std::string(FusionRuleName(*rule)) : "-";
      std::snprintf(buf, sizeof(buf), "%-14s %-8s", seg.c_str(), fusion.c_str());
      out << buf;
      for (int m : mags) {
        std::snprintf(buf, sizeof(buf), " %7s",
                      cell(level, rule, m, image_level).c_str());
        out << buf;
      }
      out << '\n';
    }
    if (image_level) out << '\n';
  }
  return out.str();
}

}  // namespace patchfuse
