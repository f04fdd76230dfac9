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

#include "patchfuse/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <system_error>

#include "patchfuse/dataset.h"
#include "patchfuse/error.h"
#include "patchfuse/features.h"
#include "patchfuse/fusion.h"
#include "patchfuse/head.h"
#include "patchfuse/pipeline.h"
#include "patchfuse/quadtree.h"

namespace patchfuse {
namespace {

namespace fs = std::filesystem;

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingData:
      return kExitMissingData;
    case ErrorCode::kNumerical:
      return kExitNumerical;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kFormat:
    case ErrorCode::kIo:
      return kExitUsage;
  }
  return kExitUsage;
}

std::vector<int> ParseIntList(const std::string& text, const char* what) {
  std::vector<int> out;
  size_t start = 0;
  while (start <= text.size()) {
    size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    int v = 0;
    const char* first = text.data() + start;
    const char* last = text.data() + comma;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("bad ") + what + " list '" + text + "'");
    }
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

std::pair<int, int> ParseSize(const std::string& text) {
  const size_t x = text.find('x');
  if (x == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                "size must look like WxH, got '" + text + "'");
  }
  int w = 0, h = 0;
  auto rw = std::from_chars(text.data(), text.data() + x, w);
  auto rh = std::from_chars(text.data() + x + 1, text.data() + text.size(), h);
  if (rw.ec != std::errc() || rw.ptr != text.data() + x ||
      rh.ec != std::errc() || rh.ptr != text.data() + text.size() || w < 1 ||
      h < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "size must look like WxH, got '" + text + "'");
  }
  return {w, h};
}

void RequireFile(const std::string& path) {
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorCode::kIo, "no such file: " + path);
  }
}

struct TrainFlags {
  double lr = 0.01;
  int batch = 32;
  int epochs = 200;
  int patience = 10;

  void Register(CLI::App* app) {
    app->add_option("--lr", lr, "Learning rate")->capture_default_str();
    app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--epochs", epochs, "Maximum epochs")->capture_default_str();
    app->add_option("--patience", patience, "Early-stopping patience")
        ->capture_default_str();
  }

  TrainConfig ToConfig(uint64_t master_seed) const {
    const StageSeeds seeds = StageSeeds::FromMaster(master_seed);
    TrainConfig c;
    c.learning_rate = lr;
    c.batch_size = batch;
    c.max_epochs = epochs;
    c.patience = patience;
    c.seed = seeds.init;
    c.shuffle_seed = seeds.shuffle;
    return c;
  }
};

// Manifest records, optionally restricted to one magnification.
std::vector<DatasetRecord> SelectRecords(const std::string& manifest,
                                         std::optional<int> magnification) {
  RequireFile(manifest);
  std::vector<DatasetRecord> records = LoadManifestFile(manifest);
  if (magnification) {
    std::erase_if(records, [&](const DatasetRecord& r) {
      return r.magnification != *magnification;
    });
  }
  return records;
}

std::vector<DatasetRecord> InSplit(const std::vector<DatasetRecord>& records,
                                   const SplitAssignment& split, Split which) {
  std::vector<DatasetRecord> out;
  for (const DatasetRecord& r : records) {
    if (split.Of(r.image_id) == which) out.push_back(r);
  }
  return out;
}

int CmdSynth(const std::string& out_dir, int patients, int images,
             const std::string& size, uint64_t seed, const std::string& mags,
             std::ostream& err) {
  const auto [w, h] = ParseSize(size);
  SyntheticSpec spec;
  spec.patients = patients;
  spec.images_per_patient = images;
  spec.width = w;
  spec.height = h;
  spec.seed = seed;
  spec.magnifications = ParseIntList(mags, "magnification");
  const SyntheticCorpus corpus = GenerateSynthetic(spec);
  WriteSyntheticCorpus(corpus, out_dir);
  err << "wrote " << corpus.records.size() << " images and manifest.csv to "
      << out_dir << '\n';
  return kExitOk;
}

int CmdSplit(const std::string& manifest, const std::string& fractions,
             uint64_t seed, const std::string& out, std::ostream& err) {
  const SplitFractions f = ParseFractions(fractions);
  const std::vector<DatasetRecord> records = SelectRecords(manifest, {});
  const SplitAssignment split =
      SplitDataset(records, f, StageSeeds::FromMaster(seed).split);
  WriteSplitFile(split, out);
  err << "assigned " << split.splits.size() << " images\n";
  return kExitOk;
}

int CmdExtract(const std::string& manifest, const std::string& split_file,
               int level, const std::string& backend_name,
               const std::string& cache_path, uint64_t seed,
               std::optional<int> magnification, std::ostream& err) {
  GridSide(level);
  std::vector<DatasetRecord> records = SelectRecords(manifest, magnification);
  if (!split_file.empty()) {
    RequireFile(split_file);
    const SplitAssignment split = ReadSplitFile(split_file);
    std::erase_if(records, [&](const DatasetRecord& r) {
      return split.splits.find(r.image_id) == split.splits.end();
    });
  }
  if (backend_name == "cache") {
    RequireFile(cache_path);
    const FeatureCache cache = ReadCacheFile(cache_path);
    const std::vector<std::string> missing =
        MissingPatchIds(records, level, cache);
    if (!missing.empty()) {
      err << "error: " << missing.size() << " feature(s) missing from "
          << cache_path << "; first missing id: " << missing.front() << '\n';
      return kExitMissingData;
    }
    err << "all " << records.size() << " images present in " << cache_path
        << '\n';
    return kExitOk;
  }
  SyntheticExtractor backend(StageSeeds::FromMaster(seed).extractor);
  const bool exists = fs::exists(cache_path);
  FeatureCache cache = exists ? ReadCacheFile(cache_path) : FeatureCache();
  if (cache.dim() != backend.dim()) {
    throw Error(ErrorCode::kInvalidArgument,
                cache_path + " has dim " + std::to_string(cache.dim()));
  }
  const size_t computed = EnsurePatchFeatures(
      records, level, DirectoryLoader(fs::path(manifest).parent_path()),
      backend, cache);
  if (computed > 0 || !exists) WriteCacheFile(cache, cache_path);
  err << "extracted " << computed << " feature vector(s); cache holds "
      << cache.size() << '\n';
  return kExitOk;
}

int CmdTrain(const std::string& cache_path, const std::string& manifest,
             const std::string& split_file, int level, const TrainFlags& flags,
             uint64_t seed, const std::string& out,
             std::optional<int> magnification, std::ostream& err) {
  GridSide(level);
  const TrainConfig config = flags.ToConfig(seed);
  config.Validate();
  const std::vector<DatasetRecord> records = SelectRecords(manifest, magnification);
  RequireFile(split_file);
  const SplitAssignment split = ReadSplitFile(split_file);
  RequireFile(cache_path);
  const FeatureCache cache = ReadCacheFile(cache_path);
  const auto train_records = InSplit(records, split, Split::kTrain);
  const auto val_records = InSplit(records, split, Split::kValidation);
  if (train_records.empty() || val_records.empty()) {
    err << "error: training or validation split is empty\n";
    return kExitMissingData;
  }
  const auto train = PatchExamples(train_records, level, cache);
  const auto val = PatchExamples(val_records, level, cache);
  TrainHistory history;
  const ClassifierModel model = Train(train, val, config, &history);
  SaveModelFile(model, out);
  err << "trained on " << train.size() << " patches for "
      << model.metadata.epochs_run
      << " epoch(s); best validation loss " << model.metadata.validation_loss
      << '\n';
  return kExitOk;
}

int CmdEval(const std::string& model_path, const std::string& cache_path,
            const std::string& manifest, const std::string& split_file,
            int level, const std::string& rules_text, const std::string& out_dir,
            std::optional<int> magnification, std::ostream& out,
            std::ostream& err) {
  GridSide(level);
  const std::vector<FusionRule> rules = ParseFusionRules(rules_text);
  RequireFile(model_path);
  const ClassifierModel model = LoadModelFile(model_path);
  const std::vector<DatasetRecord> records = SelectRecords(manifest, magnification);
  RequireFile(split_file);
  const SplitAssignment split = ReadSplitFile(split_file);
  RequireFile(cache_path);
  const FeatureCache cache = ReadCacheFile(cache_path);
  const auto test = InSplit(records, split, Split::kTest);
  if (test.empty()) {
    err << "error: test split is empty\n";
    return kExitMissingData;
  }
  const std::vector<ScoredGroup> groups =
      ScoreImages(model, test, level, rules, cache);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "predictions", ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir);
  for (const ScoredGroup& g : groups) {
    WritePredictionsFile(g, fs::path(out_dir) / "predictions" /
                                PredictionFileName(g.key));
  }
  const EvaluationReport report = ReportFromGroups(groups);
  WriteReportFiles(report, out_dir);
  out << report.ToTable();
  return kExitOk;
}

int CmdPredict(const std::string& model_path, const std::string& image_path,
               int level, const std::string& rule_name, uint64_t seed,
               std::ostream& out, std::ostream& err) {
  GridSide(level);
  const FusionRule rule = ParseFusionRule(rule_name);
  RequireFile(model_path);
  RequireFile(image_path);
  const ClassifierModel model = LoadModelFile(model_path);
  const RasterImage image = ReadPpmFile(image_path);
  SyntheticExtractor backend(StageSeeds::FromMaster(seed).extractor,
                             model.in_dim);
  const FusionDecision d = PredictImage(
      model, image, level, rule, backend, fs::path(image_path).stem().string());
  if (level == 1) err << "note: level 1 uses a single patch; --rule ignored\n";
  char scores[96];
  std::snprintf(scores, sizeof(scores), "%.6g,%.6g", d.scores[0], d.scores[1]);
  out << "class=" << LabelName(d.predicted_class) << " scores=" << scores
      << " rule=" << (level == 1 ? std::string_view("none") : FusionRuleName(rule))
      << " patches=" << d.n_patches << '\n';
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Patch-based image classification with quadtree fusion",
               "patchfuse"};
  app.require_subcommand(1);

  uint64_t seed = 42;
  std::optional<int> magnification;

  // synth
  std::string synth_out, synth_size = "64x64", synth_mags = "40";
  int synth_patients = 8, synth_images = 10;
  auto* synth = app.add_subcommand("synth", "Write a synthetic two-class corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--patients", synth_patients)->capture_default_str();
  synth->add_option("--images-per-patient", synth_images)->capture_default_str();
  synth->add_option("--size", synth_size, "Image size WxH")->capture_default_str();
  synth->add_option("--magnifications", synth_mags,
                    "Comma-separated magnifications cycled over each patient's images")
      ->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();

  // split
  std::string split_manifest, split_fractions = "0.7,0.15,0.15", split_out;
  auto* split = app.add_subcommand("split", "Patient-disjoint train/validation/test split");
  split->add_option("--manifest", split_manifest)->required();
  split->add_option("--fractions", split_fractions)->capture_default_str();
  split->add_option("--seed", seed)->capture_default_str();
  split->add_option("--out", split_out)->required();

  // extract
  std::string ex_manifest, ex_split, ex_backend = "synthetic", ex_cache;
  int ex_level = 1;
  auto* extract = app.add_subcommand("extract", "Fill a feature cache");
  extract->add_option("--manifest", ex_manifest)->required();
  extract->add_option("--split", ex_split);
  extract->add_option("--level", ex_level)->capture_default_str();
  extract->add_option("--backend", ex_backend)
      ->check(CLI::IsMember({"synthetic", "cache"}))
      ->capture_default_str();
  extract->add_option("--cache", ex_cache)->required();
  extract->add_option("--seed", seed)->capture_default_str();
  extract->add_option("--magnification", magnification);

  // train
  std::string tr_cache, tr_manifest, tr_split, tr_out;
  int tr_level = 1;
  TrainFlags flags;
  auto* train = app.add_subcommand("train", "Train the classifier head");
  train->add_option("--cache", tr_cache)->required();
  train->add_option("--manifest", tr_manifest)->required();
  train->add_option("--split", tr_split)->required();
  train->add_option("--level", tr_level)->capture_default_str();
  flags.Register(train);
  train->add_option("--seed", seed)->capture_default_str();
  train->add_option("--out", tr_out)->required();
  train->add_option("--magnification", magnification);

  // eval
  std::string ev_model, ev_cache, ev_manifest, ev_split, ev_rules = "sum,product,max",
                                                         ev_out;
  int ev_level = 1;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test split");
  eval->add_option("--model", ev_model)->required();
  eval->add_option("--cache", ev_cache)->required();
  eval->add_option("--manifest", ev_manifest)->required();
  eval->add_option("--split", ev_split)->required();
  eval->add_option("--level", ev_level)->capture_default_str();
  eval->add_option("--rules", ev_rules)->capture_default_str();
  eval->add_option("--out", ev_out)->required();
  eval->add_option("--magnification", magnification);

  // predict
  std::string pr_model, pr_image, pr_rule = "sum";
  int pr_level = 1;
  auto* predict = app.add_subcommand("predict", "Classify one PPM image");
  predict->add_option("--model", pr_model)->required();
  predict->add_option("--image", pr_image)->required();
  predict->add_option("--level", pr_level)->capture_default_str();
  predict->add_option("--rule", pr_rule)->capture_default_str();
  predict->add_option("--seed", seed)->capture_default_str();

  // run-all
  std::string ra_manifest, ra_out, ra_levels = "1,2,3", ra_rules = "sum,product,max",
                                   ra_mags, ra_fractions = "0.7,0.15,0.15",
                                   ra_backend = "synthetic", ra_cache;
  TrainFlags ra_flags;
  auto* run_all = app.add_subcommand("run-all", "Run the full experiment grid");
  run_all->add_option("--manifest", ra_manifest)->required();
  run_all->add_option("--out", ra_out)->required();
  run_all->add_option("--levels", ra_levels)->capture_default_str();
  run_all->add_option("--rules", ra_rules)->capture_default_str();
  run_all->add_option("--magnifications", ra_mags, "Default: all in manifest");
  run_all->add_option("--fractions", ra_fractions)->capture_default_str();
  run_all->add_option("--backend", ra_backend)
      ->check(CLI::IsMember({"synthetic", "cache"}))
      ->capture_default_str();
  run_all->add_option("--cache", ra_cache, "Feature cache for --backend cache");
  ra_flags.Register(run_all);
  run_all->add_option("--seed", seed)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) {
      err << app.get_subcommands().front()->help();
    } else {
      err << app.help();
    }
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      return CmdSynth(synth_out, synth_patients, synth_images, synth_size, seed,
                      synth_mags, err);
    }
    if (split->parsed()) {
      return CmdSplit(split_manifest, split_fractions, seed, split_out, err);
    }
    if (extract->parsed()) {
      return CmdExtract(ex_manifest, ex_split, ex_level, ex_backend, ex_cache,
                        seed, magnification, err);
    }
    if (train->parsed()) {
      return CmdTrain(tr_cache, tr_manifest, tr_split, tr_level, flags, seed,
                      tr_out, magnification, err);
    }
    if (eval->parsed()) {
      return CmdEval(ev_model, ev_cache, ev_manifest, ev_split, ev_level,
                     ev_rules, ev_out, magnification, out, err);
    }
    if (predict->parsed()) {
      return CmdPredict(pr_model, pr_image, pr_level, pr_rule, seed, out, err);
    }
    if (run_all->parsed()) {
      ExperimentConfig config;
      config.manifest = ra_manifest;
      RequireFile(ra_manifest);
      config.output_dir = ra_out;
      config.levels = ParseIntList(ra_levels, "level");
      config.rules = ParseFusionRules(ra_rules);
      if (!ra_mags.empty()) {
        config.magnifications = ParseIntList(ra_mags, "magnification");
      }
      config.fractions = ParseFractions(ra_fractions);
      config.train = ra_flags.ToConfig(seed);
      config.seed = seed;
      if (ra_backend == "cache") {
        config.backend = BackendKind::kCacheFile;
        config.cache_path = ra_cache;
        RequireFile(ra_cache);
      }
      const EvaluationReport report = RunExperiment(config);
      out << report.ToTable();
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace patchfuse
