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

#ifndef PATCHFUSE_FEATURES_H_
#define PATCHFUSE_FEATURES_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "patchfuse/raster.h"

namespace patchfuse {

// Width of the pooled CNN activation the classifier head consumes.
inline constexpr int kFeatureDim = 2048;
// Side length images are resized to before extraction.
inline constexpr int kModelInputSize = 299;

// Image-id -> feature vector store. Values are held at 32-bit precision,
// which is also the on-disk precision.
class FeatureCache {
 public:
  explicit FeatureCache(int dim = kFeatureDim);

  int dim() const { return dim_; }
  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  bool Contains(std::string_view id) const;

  // nullptr when absent.
  const std::vector<float>* Find(std::string_view id) const;

  // Throws Error(kInvalidArgument) on a duplicate or malformed id, wrong
  // length, or a non-finite value.
  void Insert(std::string id, std::vector<float> values);

  const std::map<std::string, std::vector<float>, std::less<>>& records()
      const {
    return records_;
  }

  friend bool operator==(const FeatureCache&, const FeatureCache&) = default;

 private:
  int dim_;
  std::map<std::string, std::vector<float>, std::less<>> records_;
};

// Text format:
//   # patchfuse-features v1 dim=<dim>\n
//   <id>\t<v0> <v1> ... <v{dim-1}>\n        (sorted by id)
// Values use scientific notation with 9 significant digits, enough for an
// exact float round-trip. Additional lines starting with '#' are comments.
void WriteCache(const FeatureCache& cache, std::ostream& out);
FeatureCache ReadCache(std::istream& in);

// Writes through a temporary file and renames it into place.
void WriteCacheFile(const FeatureCache& cache, const std::filesystem::path& path);
FeatureCache ReadCacheFile(const std::filesystem::path& path);

// Image -> fixed-length feature vector. Implementations may keep state (e.g.
// counters), so Extract is non-const; distinct instances are independent.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int dim() const = 0;
  // False for backends that look features up by id only.
  virtual bool needs_pixels() const { return true; }
  virtual std::vector<float> Extract(std::string_view id,
                                     const RasterImage& image) = 0;
};

inline constexpr int kDescriptorDim = 160;
inline constexpr int kHistogramBins = 32;
inline constexpr int kBlockGrid = 4;

// Hand-crafted image descriptor underlying SyntheticExtractor:
//   [0, 96)    per-channel 32-bin intensity histograms, each summing to 1
//   [96, 160)  4x4 block grid (floor cut points), row-major, four values per
//              block: mean R, G, B scaled to [0, 1] and the mean of the three
//              channel variances scaled by 1/255^2
std::array<double, kDescriptorDim> ComputeDescriptor(const RasterImage& image);

// Deterministic stand-in for a pretrained CNN: the 160-dim descriptor
// expanded by a fixed dim x 160 random projection and scaled by 1/sqrt(160).
// Projection entries are drawn row-major from SplitMix64(seed) as uniform
// values in [-1, 1).
class SyntheticExtractor : public FeatureExtractor {
 public:
  explicit SyntheticExtractor(uint64_t seed, int dim = kFeatureDim);

  int dim() const override { return dim_; }
  std::vector<float> Extract(std::string_view id,
                             const RasterImage& image) override;

  std::span<const double> projection() const { return projection_; }

 private:
  int dim_;
  std::vector<double> projection_;  // dim_ x kDescriptorDim, row-major
};

// Serves vectors from a precomputed cache; ids not present throw
// Error(kMissingData).
class CachedFeatureSource : public FeatureExtractor {
 public:
  explicit CachedFeatureSource(const FeatureCache& cache) : cache_(cache) {}

  int dim() const override { return cache_.dim(); }
  bool needs_pixels() const override { return false; }
  std::vector<float> Extract(std::string_view id,
                             const RasterImage& image) override;

 private:
  const FeatureCache& cache_;
};

struct NamedImage {
  std::string id;
  RasterImage image;
};

struct BatchResult {
  FeatureCache cache;
  size_t computed = 0;
  // (id, message) for every item the backend failed on.
  std::vector<std::pair<std::string, std::string>> failures;
};

// Fills `cache` with features for every item whose id is not yet present.
// Cached ids are never passed to the backend. A backend failure is recorded
// per id and does not stop the remaining items.
BatchResult ExtractBatch(std::span<const NamedImage> items,
                         FeatureExtractor& backend, FeatureCache cache);

}  // namespace patchfuse

#endif  // PATCHFUSE_FEATURES_H_
