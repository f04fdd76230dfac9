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

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <system_error>
#include <utility>

#include "patchfuse/error.h"
#include "patchfuse/rng.h"

namespace patchfuse {
namespace {

constexpr std::array<std::string_view, 5> kManifestColumns = {
    "image_id", "path", "label", "magnification", "patient_id"};

[[noreturn]] void LineError(std::string_view what, size_t line,
                            const std::string& msg) {
  throw Error(ErrorCode::kFormat, std::string(what) + " line " +
                                      std::to_string(line) + ": " + msg);
}

std::vector<std::string_view> SplitFields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view StripCr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::optional<int> ParseInt(std::string_view s) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

std::optional<int> ParseLabel(std::string_view token) {
  const std::string t = Lower(token);
  if (t == "benign" || t == "0") return 0;
  if (t == "malignant" || t == "1") return 1;
  return std::nullopt;
}

std::optional<int> ParseMagnification(std::string_view token) {
  std::string t = Lower(token);
  if (!t.empty() && t.back() == 'x') t.pop_back();
  const std::optional<int> v = ParseInt(t);
  if (!v || !IsValidMagnification(*v)) return std::nullopt;
  return v;
}

}  // namespace

bool IsValidMagnification(int magnification) {
  return std::find(std::begin(kMagnifications), std::end(kMagnifications),
                   magnification) != std::end(kMagnifications);
}

std::string_view LabelName(int label) {
  return label == 0 ? "benign" : "malignant";
}

std::vector<DatasetRecord> LoadManifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) LineError("manifest", 1, "missing header");
  const auto header = SplitFields(StripCr(line), ',');
  std::array<size_t, kManifestColumns.size()> column{};
  for (size_t c = 0; c < kManifestColumns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), kManifestColumns[c]);
    if (it == header.end()) {
      LineError("manifest", 1,
                "missing column '" + std::string(kManifestColumns[c]) + "'");
    }
    column[c] = static_cast<size_t>(it - header.begin());
  }

  std::vector<DatasetRecord> records;
  std::set<std::string, std::less<>> ids;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = StripCr(line);
    if (row.empty()) continue;
    const auto fields = SplitFields(row, ',');
    if (fields.size() != header.size()) {
      LineError("manifest", line_no,
                "expected " + std::to_string(header.size()) + " fields, found " +
                    std::to_string(fields.size()));
    }
    DatasetRecord r;
    r.image_id = std::string(fields[column[0]]);
    r.path = std::string(fields[column[1]]);
    r.patient_id = std::string(fields[column[4]]);
    if (r.image_id.empty()) LineError("manifest", line_no, "empty image_id");
    if (r.patient_id.empty()) LineError("manifest", line_no, "empty patient_id");
    const auto label = ParseLabel(fields[column[2]]);
    if (!label) {
      LineError("manifest", line_no,
                "bad label '" + std::string(fields[column[2]]) + "'");
    }
    r.label = *label;
    const auto mag = ParseMagnification(fields[column[3]]);
    if (!mag) {
      LineError("manifest", line_no,
                "bad magnification '" + std::string(fields[column[3]]) +
                    "' (expected 40, 100, 200 or 400)");
    }
    r.magnification = *mag;
    if (!ids.insert(r.image_id).second) {
      LineError("manifest", line_no, "duplicate image_id '" + r.image_id + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<DatasetRecord> LoadManifestFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return LoadManifest(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void WriteManifest(std::span<const DatasetRecord> records, std::ostream& out) {
  out << "image_id,path,label,magnification,patient_id\n";
  for (const DatasetRecord& r : records) {
    out << r.image_id << ',' << r.path << ',' << LabelName(r.label) << ','
        << r.magnification << ',' << r.patient_id << '\n';
  }
}

std::optional<BreakhisFields> ParseBreakhisFilename(std::string_view name) {
  const size_t slash = name.find_last_of("/\\");
  if (slash != std::string_view::npos) name.remove_prefix(slash + 1);
  const size_t dot = name.rfind('.');
  if (dot != std::string_view::npos) name = name.substr(0, dot);

  const auto parts = SplitFields(name, '_');
  if (parts.size() != 3 || parts[0].empty()) return std::nullopt;
  int label;
  if (parts[1] == "B") {
    label = 0;
  } else if (parts[1] == "M") {
    label = 1;
  } else {
    return std::nullopt;
  }
  const auto dash = SplitFields(parts[2], '-');
  // At least: <type>-<...>-<mag>-<seq>
  if (dash.size() < 4) return std::nullopt;
  const auto mag = ParseInt(dash[dash.size() - 2]);
  if (!mag || !IsValidMagnification(*mag)) return std::nullopt;
  if (!ParseInt(dash.back())) return std::nullopt;
  for (size_t i = 0; i + 2 < dash.size(); ++i) {
    if (dash[i].empty()) return std::nullopt;
  }
  const size_t patient_len =
      static_cast<size_t>(dash[dash.size() - 2].data() - parts[2].data()) - 1;
  return BreakhisFields{label, *mag, std::string(parts[2].substr(0, patient_len))};
}

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

Split ParseSplit(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    if (SplitName(s) == name) return s;
  }
  throw Error(ErrorCode::kFormat, "unknown split '" + std::string(name) + "'");
}

void SplitFractions::Validate() const {
  if (!(train > 0.0) || !(validation > 0.0) || !(test > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split fractions must be positive");
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "split fractions must sum to 1");
  }
}

SplitFractions ParseFractions(std::string_view text) {
  const auto parts = SplitFields(text, ',');
  if (parts.size() != 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "fractions must be three comma-separated numbers");
  }
  std::array<double, 3> v{};
  for (size_t i = 0; i < 3; ++i) {
    auto res = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(),
                               v[i]);
    if (res.ec != std::errc() || res.ptr != parts[i].data() + parts[i].size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad fraction '" + std::string(parts[i]) + "'");
    }
  }
  SplitFractions f{v[0], v[1], v[2]};
  f.Validate();
  return f;
}

Split SplitAssignment::Of(const std::string& image_id) const {
  auto it = splits.find(image_id);
  if (it == splits.end()) {
    throw Error(ErrorCode::kMissingData,
                "image '" + image_id + "' has no split assignment");
  }
  return it->second;
}

SplitAssignment SplitDataset(std::span<const DatasetRecord> records,
                             const SplitFractions& fractions, uint64_t seed) {
  fractions.Validate();
  SplitAssignment out;
  out.seed = seed;
  out.fractions = fractions;

  // magnification -> patient -> record indices
  std::map<int, std::map<std::string, std::vector<size_t>>> groups;
  for (size_t i = 0; i < records.size(); ++i) {
    groups[records[i].magnification][records[i].patient_id].push_back(i);
  }
  const std::array<double, 3> target_fraction = {
      fractions.train, fractions.validation, fractions.test};
  const std::array<Split, 3> kinds = {Split::kTrain, Split::kValidation,
                                      Split::kTest};

  for (auto& [mag, patients] : groups) {
    if (patients.size() < 3) {
      throw Error(ErrorCode::kInvalidArgument,
                  "magnification " + std::to_string(mag) + " has " +
                      std::to_string(patients.size()) +
                      " patient(s); at least 3 are needed for a split");
    }
    std::vector<const std::pair<const std::string, std::vector<size_t>>*> order;
    size_t total = 0;
    for (const auto& entry : patients) {
      order.push_back(&entry);
      total += entry.second.size();
    }
    SplitMix64 rng(seed + static_cast<uint64_t>(mag));
    Shuffle(std::span(order), rng);

    std::array<double, 3> count{};
    std::array<int, 3> patients_in{};
    for (size_t p = 0; p < order.size(); ++p) {
      const size_t remaining = order.size() - p;
      const size_t empty = static_cast<size_t>(
          std::count(patients_in.begin(), patients_in.end(), 0));
      int choice = -1;
      double best_deficit = 0.0;
      for (int s = 0; s < 3; ++s) {
        if (remaining <= empty && patients_in[s] != 0) continue;
        const double deficit = target_fraction[s] * total - count[s];
        if (choice < 0 || deficit > best_deficit) {
          choice = s;
          best_deficit = deficit;
        }
      }
      count[choice] += static_cast<double>(order[p]->second.size());
      ++patients_in[choice];
      for (size_t idx : order[p]->second) {
        out.splits[records[idx].image_id] = kinds[choice];
      }
    }
  }
  return out;
}

void WriteSplit(const SplitAssignment& assignment, std::ostream& out) {
  out << "image_id,split\n";
  for (const auto& [id, split] : assignment.splits) {
    out << id << ',' << SplitName(split) << '\n';
  }
}

SplitAssignment ReadSplit(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || StripCr(line) != "image_id,split") {
    LineError("split file", 1, "expected header 'image_id,split'");
  }
  SplitAssignment out;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = StripCr(line);
    if (row.empty()) continue;
    const auto fields = SplitFields(row, ',');
    if (fields.size() != 2 || fields[0].empty()) {
      LineError("split file", line_no, "expected 'image_id,split'");
    }
    Split s;
    try {
      s = ParseSplit(fields[1]);
    } catch (const Error& e) {
      LineError("split file", line_no, e.what());
    }
    if (!out.splits.emplace(std::string(fields[0]), s).second) {
      LineError("split file", line_no,
                "duplicate image_id '" + std::string(fields[0]) + "'");
    }
  }
  return out;
}

void WriteSplitFile(const SplitAssignment& assignment,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  WriteSplit(assignment, out);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

SplitAssignment ReadSplitFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return ReadSplit(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

namespace {

uint8_t ClampByte(double v) {
  return static_cast<uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

struct ClassStyle {
  std::array<double, 3> base;
  double noise;
};

constexpr ClassStyle kBenignStyle = {{225.0, 190.0, 215.0}, 10.0};
constexpr ClassStyle kMalignantStyle = {{165.0, 115.0, 170.0}, 30.0};
constexpr std::array<double, 3> kNucleusColor = {70.0, 40.0, 110.0};

RasterImage RenderImage(int label, const std::array<double, 3>& tint, int w,
                        int h, SplitMix64& rng) {
  const ClassStyle& style = label == 0 ? kBenignStyle : kMalignantStyle;
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(x, y, c) = ClampByte(style.base[c] + tint[c] +
                                    rng.NextUniform(-style.noise, style.noise));
      }
    }
  }
  if (label == 1) {
    const int blobs = std::max(3, w * h / 150);
    const int max_radius = std::max(3, std::min(w, h) / 8);
    for (int b = 0; b < blobs; ++b) {
      const int cx = static_cast<int>(rng.NextBelow(static_cast<uint64_t>(w)));
      const int cy = static_cast<int>(rng.NextBelow(static_cast<uint64_t>(h)));
      const int r = 2 + static_cast<int>(rng.NextBelow(
                            static_cast<uint64_t>(max_radius - 1)));
      for (int y = std::max(0, cy - r); y <= std::min(h - 1, cy + r); ++y) {
        for (int x = std::max(0, cx - r); x <= std::min(w - 1, cx + r); ++x) {
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
          for (int c = 0; c < 3; ++c) {
            img.at(x, y, c) = ClampByte(kNucleusColor[c] + tint[c] +
                                        rng.NextUniform(-15.0, 15.0));
          }
        }
      }
    }
  }
  return img;
}

std::string TwoDigits(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

std::string ThreeDigits(int v) {
  std::string s = std::to_string(v);
  while (s.size() < 3) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

SyntheticCorpus GenerateSynthetic(const SyntheticSpec& spec) {
  if (spec.patients < 1 || spec.images_per_patient < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "synthetic corpus needs at least one patient and one image");
  }
  if (spec.width < 1 || spec.height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic image size must be positive");
  }
  if (spec.magnifications.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no magnifications given");
  }
  for (int m : spec.magnifications) {
    if (!IsValidMagnification(m)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad magnification " + std::to_string(m));
    }
  }
  SplitMix64 rng(spec.seed);
  SyntheticCorpus corpus;
  for (int p = 0; p < spec.patients; ++p) {
    const int label = p % 2;
    const std::string patient = "SYN-P" + TwoDigits(p);
    std::array<double, 3> tint{};
    for (double& t : tint) t = rng.NextUniform(-8.0, 8.0);
    for (int i = 0; i < spec.images_per_patient; ++i) {
      DatasetRecord r;
      r.image_id = patient + "-" + ThreeDigits(i);
      r.label = label;
      r.magnification =
          spec.magnifications[static_cast<size_t>(i) % spec.magnifications.size()];
      r.patient_id = patient;
      r.path = std::string(LabelName(label)) + "/" + patient + "/" +
               r.image_id + ".ppm";
      corpus.images.push_back(
          RenderImage(label, tint, spec.width, spec.height, rng));
      corpus.records.push_back(std::move(r));
    }
  }
  return corpus;
}

void WriteSyntheticCorpus(const SyntheticCorpus& corpus,
                          const std::filesystem::path& root) {
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                "cannot create " + root.string() + ": " + ec.message());
  }
  for (size_t i = 0; i < corpus.records.size(); ++i) {
    const std::filesystem::path file = root / corpus.records[i].path;
    std::filesystem::create_directories(file.parent_path(), ec);
    if (ec) {
      throw Error(ErrorCode::kIo, "cannot create " +
                                      file.parent_path().string() + ": " +
                                      ec.message());
    }
    WritePpmFile(corpus.images[i], file);
  }
  std::ofstream out(root / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest in " + root.string());
  WriteManifest(corpus.records, out);
  if (!out) throw Error(ErrorCode::kIo, "manifest write failed");
}

}  // namespace patchfuse
