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

#ifndef PATCHFUSE_RASTER_H_
#define PATCHFUSE_RASTER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace patchfuse {

// Interleaved 8-bit RGB image, row-major, top-left origin.
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  // Zero-filled image. Throws Error(kInvalidArgument) unless both dimensions
  // are positive.
  RasterImage(int width, int height);
  // Takes ownership of `pixels`, which must hold width * height * 3 samples.
  RasterImage(int width, int height, std::vector<uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const uint8_t> pixels() const { return pixels_; }
  std::span<uint8_t> mutable_pixels() { return pixels_; }

  uint8_t at(int x, int y, int c) const {
    return pixels_[(static_cast<size_t>(y) * width_ + x) * kChannels + c];
  }
  uint8_t& at(int x, int y, int c) {
    return pixels_[(static_cast<size_t>(y) * width_ + x) * kChannels + c];
  }

  // Copies the rectangle [x0, x0 + w) x [y0, y0 + h).
  RasterImage Crop(int x0, int y0, int w, int h) const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_;
  int height_;
  std::vector<uint8_t> pixels_;
};

// Binary PPM (P6, maxval 255). Header comments are accepted. Malformed input
// throws Error(kFormat) with the byte offset of the problem.
RasterImage DecodePpm(std::span<const uint8_t> bytes);

// Header is exactly "P6\n<w> <h>\n255\n".
std::vector<uint8_t> EncodePpm(const RasterImage& image);

RasterImage ReadPpmFile(const std::filesystem::path& path);
void WritePpmFile(const RasterImage& image, const std::filesystem::path& path);

// Bilinear resampling with half-pixel centers:
//   src = (dst + 0.5) * (src_dim / dst_dim) - 0.5, clamped to [0, src_dim - 1]
// Results are rounded half away from zero.
RasterImage ResizeBilinear(const RasterImage& image, int out_width,
                           int out_height);

}  // namespace patchfuse

#endif  // PATCHFUSE_RASTER_H_
