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

#include "patchfuse/dataset.h"

#include <unistd.h>

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "patchfuse/error.h"
#include "patchfuse/raster.h"
#include "patchfuse/rng.h"

namespace patchfuse {
namespace {

std::vector<DatasetRecord> Corpus(int patients, int images_each, int mag = 40) {
  std::vector<DatasetRecord> out;
  for (int p = 0; p < patients; ++p) {
    for (int i = 0; i < images_each; ++i) {
      const std::string pid = "P" + std::to_string(p);
      out.push_back({pid + "-" + std::to_string(i), pid + ".ppm", p % 2, mag, pid});
    }
  }
  return out;
}

double MeanIntensity(const RasterImage& img) {
  double s = 0;
  for (uint8_t v : img.pixels()) s += v;
  return s / static_cast<double>(img.pixels().size());
}

TEST(ManifestTest, ParsesRows) {
  std::istringstream in(
      "image_id,path,label,magnification,patient_id\n"
      "a,img/a.png,benign,40,P1\n"
      "b,img/b.png,1,400X,P2\n");
  const auto records = LoadManifest(in);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0], (DatasetRecord{"a", "img/a.png", 0, 40, "P1"}));
  EXPECT_EQ(records[1], (DatasetRecord{"b", "img/b.png", 1, 400, "P2"}));
}

TEST(ManifestTest, LabelsAreCaseInsensitive) {
  std::istringstream in(
      "image_id,path,label,magnification,patient_id\n"
      "a,a.png,Benign,40,P1\nb,b.png,MALIGNANT,40,P1\n");
  const auto records = LoadManifest(in);
  EXPECT_EQ(records[0].label, 0);
  EXPECT_EQ(records[1].label, 1);
}

TEST(ManifestTest, ColumnOrderIsFree) {
  std::istringstream in(
      "patient_id,image_id,magnification,label,path,notes\n"
      "P1,a,100,malignant,a.png,whatever\n");
  const auto records = LoadManifest(in);
  EXPECT_EQ(records[0], (DatasetRecord{"a", "a.png", 1, 100, "P1"}));
}

TEST(ManifestTest, BadMagnificationNamesLine) {
  std::istringstream in(
      "image_id,path,label,magnification,patient_id\n"
      "a,a.png,0,40,P1\n"
      "b,b.png,0,250,P1\n");
  try {
    LoadManifest(in);
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ManifestTest, RejectsMalformed) {
  auto fails = [](const std::string& text) {
    std::istringstream in(text);
    EXPECT_THROW(LoadManifest(in), Error) << text;
  };
  fails("");
  fails("image_id,path,label,magnification\na,a,0,40\n");
  fails("image_id,path,label,magnification,patient_id\na,a.png,cancer,40,P\n");
  fails("image_id,path,label,magnification,patient_id\na,a.png,0,40\n");
  fails("image_id,path,label,magnification,patient_id\na,a.png,0,40,P\na,b.png,0,40,P\n");
}

TEST(ManifestTest, RoundTrip) {
  const auto records = Corpus(4, 3, 200);
  std::stringstream buf;
  WriteManifest(records, buf);
  EXPECT_EQ(LoadManifest(buf), records);
}

TEST(BreakhisTest, ParsesFilenames) {
  EXPECT_EQ(ParseBreakhisFilename("SOB_B_TA-14-4659CD-40-001.png"),
            (BreakhisFields{0, 40, "TA-14-4659CD"}));
  EXPECT_EQ(ParseBreakhisFilename("SOB_M_DC-14-2523-400-012.png"),
            (BreakhisFields{1, 400, "DC-14-2523"}));
  EXPECT_EQ(ParseBreakhisFilename("random.png"), std::nullopt);
  EXPECT_EQ(ParseBreakhisFilename("SOB_X_DC-14-2523-400-012.png"), std::nullopt);
  EXPECT_EQ(ParseBreakhisFilename("SOB_M_DC-14-2523-250-012.png"), std::nullopt);
}

TEST(SplitTest, Deterministic) {
  const auto records = Corpus(10, 3);
  const SplitAssignment a = SplitDataset(records, {}, 17);
  const SplitAssignment b = SplitDataset(records, {}, 17);
  EXPECT_EQ(a.splits, b.splits);
}

TEST(SplitTest, SingleImagePatientsHitTargets) {
  const auto records = Corpus(100, 1);
  for (uint64_t seed : {0ULL, 1ULL, 42ULL}) {
    const SplitAssignment a = SplitDataset(records, {}, seed);
    std::map<Split, int> counts;
    for (const auto& [id, s] : a.splits) ++counts[s];
    EXPECT_NEAR(counts[Split::kTrain], 70, 1);
    EXPECT_NEAR(counts[Split::kValidation], 15, 1);
    EXPECT_NEAR(counts[Split::kTest], 15, 1);
  }
}

TEST(SplitTest, PatientDisjointAndPopulatedProperty) {
  SplitMix64 rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<DatasetRecord> records;
    const int patients = 3 + static_cast<int>(rng.NextBelow(20));
    for (int p = 0; p < patients; ++p) {
      const int images = 1 + static_cast<int>(rng.NextBelow(12));
      for (int i = 0; i < images; ++i) {
        const int mag = kMagnifications[rng.NextBelow(2)];
        const std::string pid = "P" + std::to_string(p);
        records.push_back({pid + "-" + std::to_string(i), "x", p % 2, mag, pid});
      }
    }
    std::map<int, std::set<std::string>> patients_by_mag;
    for (const auto& r : records) patients_by_mag[r.magnification].insert(r.patient_id);
    bool enough = true;
    for (const auto& [mag, ps] : patients_by_mag) enough &= ps.size() >= 3;
    if (!enough) {
      EXPECT_THROW(SplitDataset(records, {}, t), Error);
      continue;
    }
    const SplitAssignment a = SplitDataset(records, {}, t);
    ASSERT_EQ(a.splits.size(), records.size());
    std::map<std::pair<int, std::string>, Split> patient_split;
    std::map<int, std::set<Split>> used;
    for (const auto& r : records) {
      const Split s = a.Of(r.image_id);
      const auto key = std::make_pair(r.magnification, r.patient_id);
      auto [it, inserted] = patient_split.emplace(key, s);
      ASSERT_EQ(it->second, s) << "patient " << r.patient_id << " split twice";
      used[r.magnification].insert(s);
    }
    for (const auto& [mag, splits] : used) EXPECT_EQ(splits.size(), 3u);
  }
}

TEST(SplitTest, TooFewPatients) {
  EXPECT_THROW(SplitDataset(Corpus(2, 10), {}, 0), Error);
}

TEST(SplitTest, FractionsValidated) {
  EXPECT_THROW(ParseFractions("0.5,0.5,0.5"), Error);
  EXPECT_THROW(ParseFractions("0.5,0.5"), Error);
  EXPECT_THROW(ParseFractions("1,0,0"), Error);
  const SplitFractions f = ParseFractions("0.6,0.2,0.2");
  EXPECT_DOUBLE_EQ(f.train, 0.6);
}

TEST(SplitTest, FileRoundTrip) {
  const SplitAssignment a = SplitDataset(Corpus(6, 2), {}, 3);
  std::stringstream buf;
  WriteSplit(a, buf);
  EXPECT_EQ(buf.str().rfind("image_id,split\n", 0), 0u);
  const SplitAssignment b = ReadSplit(buf);
  EXPECT_EQ(b.splits, a.splits);
  EXPECT_THROW(b.Of("nope"), Error);
}

TEST(SyntheticTest, Deterministic) {
  SyntheticSpec spec;
  spec.seed = 4;
  const SyntheticCorpus a = GenerateSynthetic(spec);
  const SyntheticCorpus b = GenerateSynthetic(spec);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.images, b.images);
  ASSERT_EQ(a.records.size(), 80u);
  spec.seed = 5;
  EXPECT_NE(GenerateSynthetic(spec).images, a.images);
}

TEST(SyntheticTest, ClassesDifferInBrightness) {
  SyntheticSpec spec;
  spec.seed = 1;
  const SyntheticCorpus c = GenerateSynthetic(spec);
  double sum[2] = {0, 0};
  int n[2] = {0, 0};
  for (size_t i = 0; i < c.records.size(); ++i) {
    sum[c.records[i].label] += MeanIntensity(c.images[i]);
    ++n[c.records[i].label];
  }
  ASSERT_EQ(n[0], 40);
  ASSERT_EQ(n[1], 40);
  EXPECT_GT(sum[0] / n[0], sum[1] / n[1]);
}

TEST(SyntheticTest, WritesTree) {
  SyntheticSpec spec;
  spec.patients = 4;
  spec.images_per_patient = 2;
  spec.width = 16;
  spec.height = 12;
  const SyntheticCorpus c = GenerateSynthetic(spec);
  const auto root = std::filesystem::temp_directory_path() /
                    ("patchfuse_synth_test_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  WriteSyntheticCorpus(c, root);
  const auto records = LoadManifestFile(root / "manifest.csv");
  ASSERT_EQ(records, c.records);
  for (size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(ReadPpmFile(root / records[i].path), c.images[i]);
    EXPECT_EQ(records[i].path.rfind(std::string(LabelName(records[i].label)) + "/", 0), 0u);
  }
  std::filesystem::remove_all(root);
}

}  // namespace
}  // namespace patchfuse
