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

#ifndef PATCHFUSE_PIPELINE_H_
#define PATCHFUSE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchfuse/dataset.h"
#include "patchfuse/features.h"
#include "patchfuse/fusion.h"
#include "patchfuse/head.h"
#include "patchfuse/metrics.h"
#include "patchfuse/raster.h"

namespace patchfuse {

// Per-stage seeds derived from one master seed.
struct StageSeeds {
  uint64_t split;
  uint64_t init;
  uint64_t shuffle;
  uint64_t extractor;

  static StageSeeds FromMaster(uint64_t master) {
    return {master, master + 1, master + 2, master + 3};
  }
};

// Quadtree split of `image` with every patch resized to the model input
// size. Ids follow PatchId(parent_id, level, row, col).
std::vector<NamedImage> PreparePatches(const RasterImage& image,
                                       const std::string& parent_id, int level,
                                       int input_size = kModelInputSize);

using ImageLoader = std::function<RasterImage(const DatasetRecord&)>;

// Loads record paths relative to `root` (absolute paths are used as is).
ImageLoader DirectoryLoader(std::filesystem::path root);

// Patch ids of `records` at `level` that `cache` lacks, in record order.
std::vector<std::string> MissingPatchIds(std::span<const DatasetRecord> records,
                                         int level, const FeatureCache& cache);

// Extracts features for every patch of `records` at `level` not yet in
// `cache`; images are only loaded when at least one of their patches is
// missing. Returns the number of backend invocations. Backend failures are
// collected and rethrown as one Error(kMissingData).
size_t EnsurePatchFeatures(std::span<const DatasetRecord> records, int level,
                           const ImageLoader& load, FeatureExtractor& backend,
                           FeatureCache& cache);

// One training example per patch, labelled with its parent image's label.
std::vector<LabeledExample> PatchExamples(std::span<const DatasetRecord> records,
                                          int level, const FeatureCache& cache);

// Probability vector per patch, row-major grid order.
std::vector<ProbabilityVector> PatchProbabilities(const ClassifierModel& model,
                                                  const std::string& image_id,
                                                  int level,
                                                  const FeatureCache& cache);

// Classifies one image: quadtree split, per-patch resize, extraction,
// forward pass, fusion. Each patch is extracted and evaluated once no matter
// how many rules are requested. Level 1 yields one decision (rules ignored).
std::vector<FusionDecision> PredictImage(const ClassifierModel& model,
                                         const RasterImage& image, int level,
                                         std::span<const FusionRule> rules,
                                         FeatureExtractor& backend,
                                         const std::string& image_id = "image");

FusionDecision PredictImage(const ClassifierModel& model,
                            const RasterImage& image, int level,
                            FusionRule rule, FeatureExtractor& backend,
                            const std::string& image_id = "image");

struct ScoredPrediction {
  Prediction prediction;
  std::vector<double> scores;
};

struct ScoredGroup {
  ConfigurationKey key;
  std::vector<ScoredPrediction> items;
};

// Fused predictions for `records` from cached patch features, one group per
// (magnification, rule). Level 1 produces a single rule-less group per
// magnification.
std::vector<ScoredGroup> ScoreImages(const ClassifierModel& model,
                                     std::span<const DatasetRecord> records,
                                     int level,
                                     std::span<const FusionRule> rules,
                                     const FeatureCache& cache);

// "<mag>-L<level>-<rule>.csv"; level 1 uses "none" for the rule.
std::string PredictionFileName(const ConfigurationKey& key);
void WritePredictionsFile(const ScoredGroup& group,
                          const std::filesystem::path& path);

EvaluationReport ReportFromGroups(std::span<const ScoredGroup> groups);

// report.csv, report.txt and confusion.csv in `dir`.
void WriteReportFiles(const EvaluationReport& report,
                      const std::filesystem::path& dir);

enum class BackendKind { kSynthetic, kCacheFile };

struct ExperimentConfig {
  // Corpus: synthetic when set, otherwise the manifest.
  std::optional<SyntheticSpec> synthetic;
  std::filesystem::path manifest;
  // Empty selects every magnification present in the corpus.
  std::vector<int> magnifications;
  std::vector<int> levels = {1, 2, 3};
  std::vector<FusionRule> rules = {FusionRule::kSum, FusionRule::kProduct,
                                   FusionRule::kMax};
  SplitFractions fractions;
  // Seeds are replaced by the stage seeds derived from `seed`.
  TrainConfig train;
  BackendKind backend = BackendKind::kSynthetic;
  // Precomputed features for BackendKind::kCacheFile.
  std::filesystem::path cache_path;
  std::filesystem::path output_dir;
  uint64_t seed = 42;

  void Validate() const;
};

// Runs split -> segment -> extract -> train -> predict -> fuse -> evaluate
// for every requested (magnification, level). Artifacts go to output_dir:
//   splits/<mag>.csv  features/<mag>-L<level>.cache
//   models/<mag>-L<level>.model  predictions/<mag>-L<level>-<rule>.csv
//   report.csv  report.txt  confusion.csv
// Existing feature caches in output_dir are reused.
EvaluationReport RunExperiment(const ExperimentConfig& config);

// Same, with an explicit extraction backend.
EvaluationReport RunExperiment(const ExperimentConfig& config,
                               FeatureExtractor& backend);

}  // namespace patchfuse

#endif  // PATCHFUSE_PIPELINE_H_
