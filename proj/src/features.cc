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

#include "patchfuse/features.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <system_error>

#include "patchfuse/error.h"
#include "patchfuse/quadtree.h"
#include "patchfuse/rng.h"

namespace patchfuse {
namespace {

constexpr std::string_view kCacheMagic = "# patchfuse-features v1 dim=";

[[noreturn]] void CacheFormatError(size_t line, const std::string& what) {
  throw Error(ErrorCode::kFormat,
              "feature cache line " + std::to_string(line) + ": " + what);
}

bool ValidId(std::string_view id) {
  if (id.empty() || id.front() == '#') return false;
  for (char c : id) {
    if (c == '\t' || c == '\n' || c == '\r' || c == ' ') return false;
  }
  return true;
}

}  // namespace

FeatureCache::FeatureCache(int dim) : dim_(dim) {
  if (dim < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature dim must be positive, got " + std::to_string(dim));
  }
}

bool FeatureCache::Contains(std::string_view id) const {
  return records_.find(id) != records_.end();
}

const std::vector<float>* FeatureCache::Find(std::string_view id) const {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

void FeatureCache::Insert(std::string id, std::vector<float> values) {
  if (!ValidId(id)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid feature id '" + id + "'");
  }
  if (values.size() != static_cast<size_t>(dim_)) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature '" + id + "' has length " +
                    std::to_string(values.size()) + ", cache dim is " +
                    std::to_string(dim_));
  }
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "feature '" + id + "' contains a non-finite value");
    }
  }
  auto [it, inserted] = records_.try_emplace(std::move(id), std::move(values));
  if (!inserted) {
    throw Error(ErrorCode::kInvalidArgument,
                "duplicate feature id '" + it->first + "'");
  }
}

void WriteCache(const FeatureCache& cache, std::ostream& out) {
  out << kCacheMagic << cache.dim() << '\n';
  std::string line;
  char buf[32];
  for (const auto& [id, values] : cache.records()) {
    line.assign(id);
    line += '\t';
    for (size_t i = 0; i < values.size(); ++i) {
      if (i > 0) line += ' ';
      auto res = std::to_chars(buf, buf + sizeof(buf), values[i],
                               std::chars_format::scientific, 8);
      line.append(buf, res.ptr);
    }
    line += '\n';
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "feature cache write failed");
}

FeatureCache ReadCache(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) CacheFormatError(1, "missing header");
  if (line.rfind(kCacheMagic, 0) != 0) {
    CacheFormatError(1, "bad header '" + line + "'");
  }
  int dim = 0;
  {
    const char* first = line.data() + kCacheMagic.size();
    const char* last = line.data() + line.size();
    auto res = std::from_chars(first, last, dim);
    if (res.ec != std::errc() || res.ptr != last || dim < 1) {
      CacheFormatError(1, "bad dim in header '" + line + "'");
    }
  }
  FeatureCache cache(dim);
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) CacheFormatError(line_no, "empty line");
    if (line.front() == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) CacheFormatError(line_no, "missing tab");
    std::string id = line.substr(0, tab);
    if (!ValidId(id)) CacheFormatError(line_no, "invalid id '" + id + "'");
    if (cache.Contains(id)) {
      CacheFormatError(line_no, "duplicate id '" + id + "'");
    }
    std::vector<float> values;
    values.reserve(dim);
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      const char* tok_end = p;
      while (tok_end < end && *tok_end != ' ') ++tok_end;
      float v = 0.0f;
      auto res = std::from_chars(p, tok_end, v);
      if (res.ec != std::errc() || res.ptr != tok_end || !std::isfinite(v)) {
        CacheFormatError(line_no, "non-numeric token '" +
                                      std::string(p, tok_end) + "'");
      }
      values.push_back(v);
      p = tok_end < end ? tok_end + 1 : end;
    }
    if (values.size() != static_cast<size_t>(dim)) {
      CacheFormatError(line_no, "expected " + std::to_string(dim) +
                                    " values, found " +
                                    std::to_string(values.size()));
    }
    cache.Insert(std::move(id), std::move(values));
  }
  return cache;
}

void WriteCacheFile(const FeatureCache& cache,
                    const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    WriteCache(cache, out);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                "cannot rename " + tmp.string() + ": " + ec.message());
  }
}

FeatureCache ReadCacheFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return ReadCache(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::array<double, kDescriptorDim> ComputeDescriptor(const RasterImage& image) {
  constexpr int kChannels = RasterImage::kChannels;
  std::array<double, kDescriptorDim> d{};
  const double n = static_cast<double>(image.width()) * image.height();

  std::array<uint64_t, kChannels * kHistogramBins> counts{};
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < kChannels; ++c) {
        ++counts[c * kHistogramBins + image.at(x, y, c) / (256 / kHistogramBins)];
      }
    }
  }
  for (size_t i = 0; i < counts.size(); ++i) d[i] = counts[i] / n;

  const std::vector<int> xs = CutPoints(image.width(), kBlockGrid);
  const std::vector<int> ys = CutPoints(image.height(), kBlockGrid);
  size_t out = kChannels * kHistogramBins;
  for (int br = 0; br < kBlockGrid; ++br) {
    for (int bc = 0; bc < kBlockGrid; ++bc) {
      const double count =
          static_cast<double>(xs[bc + 1] - xs[bc]) * (ys[br + 1] - ys[br]);
      std::array<double, kChannels> sum{};
      std::array<double, kChannels> sum_sq{};
      for (int y = ys[br]; y < ys[br + 1]; ++y) {
        for (int x = xs[bc]; x < xs[bc + 1]; ++x) {
          for (int c = 0; c < kChannels; ++c) {
            const double v = image.at(x, y, c);
            sum[c] += v;
            sum_sq[c] += v * v;
          }
        }
      }
      double var_mean = 0.0;
      for (int c = 0; c < kChannels; ++c) {
        // Blocks are empty when an axis has fewer than 4 pixels.
        const double mean = count > 0 ? sum[c] / count : 0.0;
        const double var =
            count > 0 ? std::max(0.0, sum_sq[c] / count - mean * mean) : 0.0;
        d[out++] = mean / 255.0;
        var_mean += var;
      }
      d[out++] = var_mean / kChannels / (255.0 * 255.0);
    }
  }
  return d;
}

SyntheticExtractor::SyntheticExtractor(uint64_t seed, int dim)
    : dim_(dim), projection_(static_cast<size_t>(dim) * kDescriptorDim) {
  if (dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "extractor dim must be positive");
  }
  SplitMix64 rng(seed);
  for (double& w : projection_) w = rng.NextUniform(-1.0, 1.0);
}

std::vector<float> SyntheticExtractor::Extract(std::string_view /*id*/,
                                               const RasterImage& image) {
  const std::array<double, kDescriptorDim> d = ComputeDescriptor(image);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kDescriptorDim));
  std::vector<float> out(dim_);
  for (int i = 0; i < dim_; ++i) {
    const double* row = projection_.data() + static_cast<size_t>(i) * kDescriptorDim;
    double acc = 0.0;
    for (int j = 0; j < kDescriptorDim; ++j) acc += row[j] * d[j];
    out[i] = static_cast<float>(acc * scale);
  }
  return out;
}

std::vector<float> CachedFeatureSource::Extract(std::string_view id,
                                                const RasterImage& /*image*/) {
  const std::vector<float>* v = cache_.Find(id);
  if (v == nullptr) {
    throw Error(ErrorCode::kMissingData,
                "feature cache has no entry for '" + std::string(id) + "'");
  }
  return *v;
}

BatchResult ExtractBatch(std::span<const NamedImage> items,
                         FeatureExtractor& backend, FeatureCache cache) {
  if (backend.dim() != cache.dim()) {
    throw Error(ErrorCode::kInvalidArgument,
                "backend dim " + std::to_string(backend.dim()) +
                    " does not match cache dim " + std::to_string(cache.dim()));
  }
  std::set<std::string_view> seen;
  for (const NamedImage& item : items) {
    if (!seen.insert(item.id).second) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate id '" + item.id + "' in extraction batch");
    }
  }
  BatchResult result{std::move(cache), 0, {}};
  for (const NamedImage& item : items) {
    if (result.cache.Contains(item.id)) continue;
    try {
      std::vector<float> v = backend.Extract(item.id, item.image);
      ++result.computed;
      result.cache.Insert(item.id, std::move(v));
    } catch (const std::exception& e) {
      result.failures.emplace_back(item.id, e.what());
    }
  }
  return result;
}

}  // namespace patchfuse
