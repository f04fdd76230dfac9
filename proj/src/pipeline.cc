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

#include "patchfuse/pipeline.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <system_error>
#include <utility>

#include "patchfuse/error.h"
#include "patchfuse/quadtree.h"

namespace patchfuse {
namespace {

void MakeDirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                "cannot create " + dir.string() + ": " + ec.message());
  }
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::string FormatScore(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v,
                           std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

std::string JoinIds(const std::vector<std::string>& ids, size_t limit) {
  std::string out;
  for (size_t i = 0; i < ids.size() && i < limit; ++i) {
    if (i > 0) out += ", ";
    out += ids[i];
  }
  if (ids.size() > limit) out += ", ...";
  return out;
}

}  // namespace

std::vector<NamedImage> PreparePatches(const RasterImage& image,
                                       const std::string& parent_id, int level,
                                       int input_size) {
  PatchSet set = SplitImage(image, level, parent_id);
  std::vector<NamedImage> out;
  out.reserve(set.patches.size());
  for (const Patch& p : set.patches) {
    out.push_back({PatchId(parent_id, level, p.row, p.col),
                   ResizeBilinear(p.image, input_size, input_size)});
  }
  return out;
}

ImageLoader DirectoryLoader(std::filesystem::path root) {
  return [root = std::move(root)](const DatasetRecord& r) {
    const std::filesystem::path p(r.path);
    return ReadPpmFile(p.is_absolute() ? p : root / p);
  };
}

std::vector<std::string> MissingPatchIds(std::span<const DatasetRecord> records,
                                         int level, const FeatureCache& cache) {
  std::vector<std::string> missing;
  for (const DatasetRecord& r : records) {
    for (std::string& id : PatchIds(r.image_id, level)) {
      if (!cache.Contains(id)) missing.push_back(std::move(id));
    }
  }
  return missing;
}

size_t EnsurePatchFeatures(std::span<const DatasetRecord> records, int level,
                           const ImageLoader& load, FeatureExtractor& backend,
                           FeatureCache& cache) {
  size_t computed = 0;
  std::vector<std::string> failures;
  for (const DatasetRecord& r : records) {
    const std::vector<std::string> ids = PatchIds(r.image_id, level);
    const bool complete = std::all_of(
        ids.begin(), ids.end(),
        [&](const std::string& id) { return cache.Contains(id); });
    if (complete) continue;
    std::vector<NamedImage> patches;
    if (backend.needs_pixels()) {
      patches = PreparePatches(load(r), r.image_id, level);
    } else {
      for (std::string id : ids) patches.push_back({std::move(id), RasterImage(1, 1)});
    }
    BatchResult result = ExtractBatch(patches, backend, std::move(cache));
    cache = std::move(result.cache);
    computed += result.computed;
    for (auto& [id, message] : result.failures) {
      failures.push_back(id + " (" + message + ")");
    }
  }
  if (!failures.empty()) {
    throw Error(ErrorCode::kMissingData,
                "feature extraction failed for " +
                    std::to_string(failures.size()) +
                    " patch(es): " + JoinIds(failures, 3));
  }
  return computed;
}

std::vector<LabeledExample> PatchExamples(std::span<const DatasetRecord> records,
                                          int level, const FeatureCache& cache) {
  std::vector<LabeledExample> out;
  for (const DatasetRecord& r : records) {
    for (const std::string& id : PatchIds(r.image_id, level)) {
      const std::vector<float>* v = cache.Find(id);
      if (v == nullptr) {
        throw Error(ErrorCode::kMissingData, "no cached features for " + id);
      }
      out.push_back(MakeExample(*v, r.label));
    }
  }
  return out;
}

std::vector<ProbabilityVector> PatchProbabilities(const ClassifierModel& model,
                                                  const std::string& image_id,
                                                  int level,
                                                  const FeatureCache& cache) {
  std::vector<ProbabilityVector> probs;
  for (const std::string& id : PatchIds(image_id, level)) {
    const std::vector<float>* v = cache.Find(id);
    if (v == nullptr) {
      throw Error(ErrorCode::kMissingData, "no cached features for " + id);
    }
    const std::vector<double> x(v->begin(), v->end());
    probs.push_back(Forward(model, x));
  }
  return probs;
}

std::vector<FusionDecision> PredictImage(const ClassifierModel& model,
                                         const RasterImage& image, int level,
                                         std::span<const FusionRule> rules,
                                         FeatureExtractor& backend,
                                         const std::string& image_id) {
  if (backend.dim() != model.in_dim) {
    throw Error(ErrorCode::kInvalidArgument,
                "backend produces " + std::to_string(backend.dim()) +
                    "-dim features, model expects " +
                    std::to_string(model.in_dim));
  }
  std::vector<ProbabilityVector> probs;
  for (const NamedImage& patch : PreparePatches(image, image_id, level)) {
    const std::vector<float> f = backend.Extract(patch.id, patch.image);
    const std::vector<double> x(f.begin(), f.end());
    probs.push_back(Forward(model, x));
  }
  if (level == 1) return {Fuse(probs, FusionRule::kSum)};
  if (rules.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no fusion rule given");
  }
  std::vector<FusionDecision> out;
  for (FusionRule rule : rules) out.push_back(Fuse(probs, rule));
  return out;
}

FusionDecision PredictImage(const ClassifierModel& model,
                            const RasterImage& image, int level,
                            FusionRule rule, FeatureExtractor& backend,
                            const std::string& image_id) {
  const FusionRule rules[] = {rule};
  return PredictImage(model, image, level, rules, backend, image_id).front();
}

std::vector<ScoredGroup> ScoreImages(const ClassifierModel& model,
                                     std::span<const DatasetRecord> records,
                                     int level,
                                     std::span<const FusionRule> rules,
                                     const FeatureCache& cache) {
  std::vector<std::optional<FusionRule>> keys;
  if (level == 1) {
    keys.push_back(std::nullopt);
  } else {
    if (rules.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "no fusion rule given");
    }
    keys.assign(rules.begin(), rules.end());
  }
  // (magnification, key index) -> group
  std::map<std::pair<int, size_t>, ScoredGroup> groups;
  for (const DatasetRecord& r : records) {
    const std::vector<ProbabilityVector> probs =
        PatchProbabilities(model, r.image_id, level, cache);
    for (size_t k = 0; k < keys.size(); ++k) {
      const FusionDecision d = Fuse(probs, keys[k].value_or(FusionRule::kSum));
      ScoredGroup& g = groups[{r.magnification, k}];
      g.key = {r.magnification, level, keys[k]};
      g.items.push_back({{r.image_id, r.patient_id, r.label, d.predicted_class,
                          r.magnification},
                         d.scores});
    }
  }
  std::vector<ScoredGroup> out;
  for (auto& [key, group] : groups) out.push_back(std::move(group));
  return out;
}

std::string PredictionFileName(const ConfigurationKey& key) {
  return std::to_string(key.magnification) + "-L" + std::to_string(key.level) +
         "-" +
         (key.rule ? std::string(FusionRuleName(*key.rule)) : std::string("none")) +
         ".csv";
}

void WritePredictionsFile(const ScoredGroup& group,
                          const std::filesystem::path& path) {
  std::string text =
      "image_id,patient_id,true_label,predicted_label,score_benign,"
      "score_malignant\n";
  for (const ScoredPrediction& item : group.items) {
    const Prediction& p = item.prediction;
    text += p.image_id + ',' + p.patient_id + ',' +
            std::string(LabelName(p.true_label)) + ',' +
            std::string(LabelName(p.predicted_label));
    for (double s : item.scores) text += ',' + FormatScore(s);
    text += '\n';
  }
  WriteTextFile(path, text);
}

EvaluationReport ReportFromGroups(std::span<const ScoredGroup> groups) {
  std::vector<PredictionGroup> plain;
  for (const ScoredGroup& g : groups) {
    PredictionGroup pg{g.key, {}};
    for (const ScoredPrediction& item : g.items) {
      pg.predictions.push_back(item.prediction);
    }
    plain.push_back(std::move(pg));
  }
  return BuildReport(plain);
}

void WriteReportFiles(const EvaluationReport& report,
                      const std::filesystem::path& dir) {
  MakeDirs(dir);
  WriteTextFile(dir / "report.csv", report.ToCsv());
  WriteTextFile(dir / "report.txt", report.ToTable());
  WriteTextFile(dir / "confusion.csv", report.ConfusionCsv());
}

void ExperimentConfig::Validate() const {
  if (levels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no segmentation levels requested");
  }
  for (int level : levels) GridSide(level);
  if (rules.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no fusion rules requested");
  }
  for (int m : magnifications) {
    if (!IsValidMagnification(m)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad magnification " + std::to_string(m));
    }
  }
  fractions.Validate();
  train.Validate();
  if (output_dir.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "output directory not set");
  }
  if (!synthetic && manifest.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "either a manifest or synthetic corpus parameters are required");
  }
  if (backend == BackendKind::kCacheFile && cache_path.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "cache-file backend requires a cache path");
  }
}

namespace {

struct Corpus {
  std::vector<DatasetRecord> records;
  ImageLoader load;
};

Corpus LoadCorpus(const ExperimentConfig& config) {
  if (config.synthetic) {
    auto synthetic =
        std::make_shared<SyntheticCorpus>(GenerateSynthetic(*config.synthetic));
    auto index = std::make_shared<std::map<std::string, size_t>>();
    for (size_t i = 0; i < synthetic->records.size(); ++i) {
      (*index)[synthetic->records[i].image_id] = i;
    }
    return {synthetic->records, [synthetic, index](const DatasetRecord& r) {
              return synthetic->images[index->at(r.image_id)];
            }};
  }
  return {LoadManifestFile(config.manifest),
          DirectoryLoader(config.manifest.parent_path())};
}

EvaluationReport RunWithCorpus(const ExperimentConfig& config,
                               const Corpus& corpus,
                               FeatureExtractor& backend) {
  const StageSeeds seeds = StageSeeds::FromMaster(config.seed);
  const std::filesystem::path& out = config.output_dir;
  for (const char* sub : {"splits", "features", "models", "predictions"}) {
    MakeDirs(out / sub);
  }

  std::set<int> mags(config.magnifications.begin(), config.magnifications.end());
  if (mags.empty()) {
    for (const DatasetRecord& r : corpus.records) mags.insert(r.magnification);
  }
  std::vector<int> levels = config.levels;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  TrainConfig train_config = config.train;
  train_config.seed = seeds.init;
  train_config.shuffle_seed = seeds.shuffle;

  std::vector<ScoredGroup> all_groups;
  for (int mag : mags) {
    std::vector<DatasetRecord> records;
    for (const DatasetRecord& r : corpus.records) {
      if (r.magnification == mag) records.push_back(r);
    }
    if (records.empty()) {
      throw Error(ErrorCode::kMissingData,
                  "no images at magnification " + std::to_string(mag));
    }
    const SplitAssignment split =
        SplitDataset(records, config.fractions, seeds.split);
    WriteSplitFile(split, out / "splits" / (std::to_string(mag) + ".csv"));

    std::vector<DatasetRecord> by_split[3];
    for (const DatasetRecord& r : records) {
      by_split[static_cast<int>(split.Of(r.image_id))].push_back(r);
    }
    for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
      if (by_split[static_cast<int>(s)].empty()) {
        throw Error(ErrorCode::kMissingData,
                    std::string(SplitName(s)) + " split is empty at " +
                        std::to_string(mag) + "X");
      }
    }

    for (int level : levels) {
      const std::string stem = std::to_string(mag) + "-L" + std::to_string(level);
      const std::filesystem::path cache_file = out / "features" / (stem + ".cache");
      FeatureCache cache = std::filesystem::exists(cache_file)
                               ? ReadCacheFile(cache_file)
                               : FeatureCache(backend.dim());
      if (cache.dim() != backend.dim()) {
        throw Error(ErrorCode::kInvalidArgument,
                    cache_file.string() + " has dim " +
                        std::to_string(cache.dim()) + ", backend produces " +
                        std::to_string(backend.dim()));
      }
      if (EnsurePatchFeatures(records, level, corpus.load, backend, cache) > 0) {
        WriteCacheFile(cache, cache_file);
      }

      const auto train_set = PatchExamples(by_split[0], level, cache);
      const auto val_set = PatchExamples(by_split[1], level, cache);
      const ClassifierModel model = Train(train_set, val_set, train_config);
      SaveModelFile(model, (out / "models" / (stem + ".model")).string());

      std::vector<ScoredGroup> groups =
          ScoreImages(model, by_split[2], level, config.rules, cache);
      for (ScoredGroup& g : groups) {
        WritePredictionsFile(g, out / "predictions" / PredictionFileName(g.key));
        all_groups.push_back(std::move(g));
      }
    }
  }
  EvaluationReport report = ReportFromGroups(all_groups);
  WriteReportFiles(report, out);
  return report;
}

}  // namespace

EvaluationReport RunExperiment(const ExperimentConfig& config,
                               FeatureExtractor& backend) {
  config.Validate();
  return RunWithCorpus(config, LoadCorpus(config), backend);
}

EvaluationReport RunExperiment(const ExperimentConfig& config) {
  config.Validate();
  const Corpus corpus = LoadCorpus(config);
  if (config.backend == BackendKind::kSynthetic) {
    SyntheticExtractor backend(StageSeeds::FromMaster(config.seed).extractor);
    return RunWithCorpus(config, corpus, backend);
  }
  const FeatureCache source = ReadCacheFile(config.cache_path);
  std::vector<std::string> missing;
  for (int level : config.levels) {
    for (const DatasetRecord& r : corpus.records) {
      if (!config.magnifications.empty() &&
          std::find(config.magnifications.begin(), config.magnifications.end(),
                    r.magnification) == config.magnifications.end()) {
        continue;
      }
      for (std::string& id : MissingPatchIds({&r, 1}, level, source)) {
        missing.push_back(std::move(id));
      }
    }
  }
  if (!missing.empty()) {
    throw Error(ErrorCode::kMissingData,
                config.cache_path.string() + " lacks " +
                    std::to_string(missing.size()) +
                    " required feature(s): " + JoinIds(missing, 5));
  }
  CachedFeatureSource backend(source);
  return RunWithCorpus(config, corpus, backend);
}

}  // namespace patchfuse
