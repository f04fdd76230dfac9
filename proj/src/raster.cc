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

#include "patchfuse/raster.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>

#include "patchfuse/error.h"

namespace patchfuse {
namespace {

[[noreturn]] void FormatError(size_t offset, const std::string& what) {
  throw Error(ErrorCode::kFormat,
              "ppm: " + what + " at byte offset " + std::to_string(offset));
}

bool IsSpace(uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

// Cursor over the PPM header. Whitespace and '#' comments may separate the
// header fields.
class HeaderReader {
 public:
  explicit HeaderReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  size_t pos() const { return pos_; }

  void SkipSeparators() {
    while (pos_ < bytes_.size()) {
      if (IsSpace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' &&
               bytes_[pos_] != '\r') {
          ++pos_;
        }
      } else {
        break;
      }
    }
  }

  long ReadNumber(const char* field) {
    SkipSeparators();
    const size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' &&
           bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1L << 30)) FormatError(start, std::string(field) + " too large");
      ++pos_;
    }
    if (pos_ == start) FormatError(start, std::string("expected ") + field);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void ConsumeSingleWhitespace() {
    if (pos_ >= bytes_.size() || !IsSpace(bytes_[pos_])) {
      FormatError(pos_, "expected whitespace after maxval");
    }
    ++pos_;
  }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace

RasterImage::RasterImage(int width, int height)
    : RasterImage(width, height,
                  std::vector<uint8_t>(
                      width > 0 && height > 0
                          ? static_cast<size_t>(width) * height * kChannels
                          : 0)) {}

RasterImage::RasterImage(int width, int height, std::vector<uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "image dimensions must be positive, got " +
                    std::to_string(width) + "x" + std::to_string(height));
  }
  const size_t expected = static_cast<size_t>(width) * height * kChannels;
  if (pixels_.size() != expected) {
    throw Error(ErrorCode::kInvalidArgument,
                "pixel buffer holds " + std::to_string(pixels_.size()) +
                    " samples, expected " + std::to_string(expected));
  }
}

RasterImage RasterImage::Crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > width_ ||
      y0 + h > height_) {
    throw Error(ErrorCode::kInvalidArgument, "crop rectangle out of bounds");
  }
  RasterImage out(w, h);
  const size_t row_bytes = static_cast<size_t>(w) * kChannels;
  for (int y = 0; y < h; ++y) {
    const auto src = pixels_.begin() +
                     ((static_cast<size_t>(y0 + y) * width_ + x0) * kChannels);
    std::copy_n(src, row_bytes,
                out.pixels_.begin() + static_cast<size_t>(y) * row_bytes);
  }
  return out;
}

RasterImage DecodePpm(std::span<const uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    FormatError(0, "missing P6 magic");
  }
  HeaderReader reader(bytes.subspan(2));
  const long width = reader.ReadNumber("width");
  const long height = reader.ReadNumber("height");
  const size_t maxval_pos = reader.pos() + 2;
  const long maxval = reader.ReadNumber("maxval");
  if (width < 1 || height < 1) FormatError(2, "zero image dimension");
  if (maxval != 255) {
    FormatError(maxval_pos, "unsupported maxval " + std::to_string(maxval));
  }
  reader.ConsumeSingleWhitespace();
  const size_t data_start = reader.pos() + 2;
  const size_t need = static_cast<size_t>(width) * height * 3;
  if (bytes.size() - data_start < need) {
    FormatError(bytes.size(), "truncated pixel payload (have " +
                                  std::to_string(bytes.size() - data_start) +
                                  " bytes, need " + std::to_string(need) + ")");
  }
  std::vector<uint8_t> pixels(bytes.begin() + data_start,
                              bytes.begin() + data_start + need);
  return RasterImage(static_cast<int>(width), static_cast<int>(height),
                     std::move(pixels));
}

std::vector<uint8_t> EncodePpm(const RasterImage& image) {
  const std::string header = "P6\n" + std::to_string(image.width()) + " " +
                             std::to_string(image.height()) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels().begin(), image.pixels().end());
  return out;
}

RasterImage ReadPpmFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  try {
    return DecodePpm(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void WritePpmFile(const RasterImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const std::vector<uint8_t> bytes = EncodePpm(image);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

namespace {

// Per-axis sampling table: for each output coordinate, the two source
// indices and the weight of the second one.
struct AxisSample {
  int lo;
  int hi;
  double frac;
};

std::vector<AxisSample> BuildAxis(int src_dim, int dst_dim) {
  std::vector<AxisSample> axis(dst_dim);
  const double scale = static_cast<double>(src_dim) / dst_dim;
  for (int d = 0; d < dst_dim; ++d) {
    double s = (d + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_dim - 1));
    const int lo = static_cast<int>(std::floor(s));
    axis[d] = {lo, std::min(lo + 1, src_dim - 1), s - lo};
  }
  return axis;
}

}  // namespace

RasterImage ResizeBilinear(const RasterImage& image, int out_width,
                           int out_height) {
  if (out_width < 1 || out_height < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "resize target must be positive, got " +
                    std::to_string(out_width) + "x" +
                    std::to_string(out_height));
  }
  const std::vector<AxisSample> xs = BuildAxis(image.width(), out_width);
  const std::vector<AxisSample> ys = BuildAxis(image.height(), out_height);
  RasterImage out(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    const AxisSample& sy = ys[y];
    for (int x = 0; x < out_width; ++x) {
      const AxisSample& sx = xs[x];
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        const double top = image.at(sx.lo, sy.lo, c) * (1.0 - sx.frac) +
                           image.at(sx.hi, sy.lo, c) * sx.frac;
        const double bottom = image.at(sx.lo, sy.hi, c) * (1.0 - sx.frac) +
                              image.at(sx.hi, sy.hi, c) * sx.frac;
        const double v = top * (1.0 - sy.frac) + bottom * sy.frac;
        // std::round rounds half away from zero.
        out.at(x, y, c) =
            static_cast<uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

}  // namespace patchfuse
