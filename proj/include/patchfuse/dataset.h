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

#ifndef PATCHFUSE_DATASET_H_
#define PATCHFUSE_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patchfuse/raster.h"

namespace patchfuse {

inline constexpr int kMagnifications[] = {40, 100, 200, 400};

bool IsValidMagnification(int magnification);

struct DatasetRecord {
  std::string image_id;
  std::string path;
  int label = 0;  // 0 = benign, 1 = malignant
  int magnification = 40;
  std::string patient_id;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

std::string_view LabelName(int label);

// CSV with header columns image_id,path,label,magnification,patient_id (any
// order, extra columns ignored). Labels: benign/malignant (any case) or 0/1.
// Errors are Error(kFormat) naming the offending line.
std::vector<DatasetRecord> LoadManifest(std::istream& in);
std::vector<DatasetRecord> LoadManifestFile(const std::filesystem::path& path);
void WriteManifest(std::span<const DatasetRecord> records, std::ostream& out);

struct BreakhisFields {
  int label;
  int magnification;
  std::string patient_id;

  friend bool operator==(const BreakhisFields&, const BreakhisFields&) = default;
};

// Parses names like "SOB_B_TA-14-4659CD-40-001.png": B/M class, the dash
// field before the sequence number is the magnification, the dash fields
// before that form the slide (patient) id.
std::optional<BreakhisFields> ParseBreakhisFilename(std::string_view name);

enum class Split { kTrain, kValidation, kTest };

std::string_view SplitName(Split split);
Split ParseSplit(std::string_view name);

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;

  // Throws Error(kInvalidArgument) unless all positive and summing to 1.
  void Validate() const;
};

// Parses "a,b,c".
SplitFractions ParseFractions(std::string_view text);

struct SplitAssignment {
  std::map<std::string, Split> splits;
  uint64_t seed = 0;
  SplitFractions fractions;

  // Throws Error(kMissingData) for unknown ids.
  Split Of(const std::string& image_id) const;
};

// Patient-disjoint split, done independently per magnification: patients
// (sorted by id) are shuffled with SplitMix64(seed + magnification) and each
// is assigned to the split furthest below its target image count. Splits
// still empty when only that many patients remain are filled first.
// Throws Error(kInvalidArgument) when a magnification has fewer than three
// patients.
SplitAssignment SplitDataset(std::span<const DatasetRecord> records,
                             const SplitFractions& fractions, uint64_t seed);

// CSV "image_id,split", rows sorted by id.
void WriteSplit(const SplitAssignment& assignment, std::ostream& out);
SplitAssignment ReadSplit(std::istream& in);
void WriteSplitFile(const SplitAssignment& assignment,
                    const std::filesystem::path& path);
SplitAssignment ReadSplitFile(const std::filesystem::path& path);

struct SyntheticSpec {
  int patients = 8;
  int images_per_patient = 10;
  int width = 64;
  int height = 64;
  uint64_t seed = 0;
  // Image i of each patient gets magnifications[i % size].
  std::vector<int> magnifications = {40};
};

struct SyntheticCorpus {
  std::vector<DatasetRecord> records;  // paths relative to the corpus root
  std::vector<RasterImage> images;     // parallel to records
};

// Two-class stand-in corpus. Patients alternate benign/malignant starting
// with benign.
//   benign:    bright pink base (225, 190, 215), per-pixel noise +-10
//   malignant: darker base (165, 115, 170), noise +-30, plus dark purple
//              (70, 40, 110) discs of radius 2..max(3, min(w, h) / 8),
//              one per 150 pixels (at least 3)
// Every patient gets a tint offset in [-8, 8] per channel.
SyntheticCorpus GenerateSynthetic(const SyntheticSpec& spec);

// Writes <root>/<class>/<patient>/<image>.ppm and <root>/manifest.csv.
void WriteSyntheticCorpus(const SyntheticCorpus& corpus,
                          const std::filesystem::path& root);

}  // namespace patchfuse

#endif  // PATCHFUSE_DATASET_H_
