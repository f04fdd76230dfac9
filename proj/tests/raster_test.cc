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
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "patchfuse/error.h"
#include "patchfuse/rng.h"

namespace patchfuse {
namespace {

std::vector<uint8_t> Bytes(const std::string& s) {
  return std::vector<uint8_t>(s.begin(), s.end());
}

RasterImage RandomImage(int w, int h, SplitMix64& rng) {
  RasterImage img(w, h);
  for (uint8_t& v : img.mutable_pixels()) v = static_cast<uint8_t>(rng.Next());
  return img;
}

ErrorCode CodeOf(const std::vector<uint8_t>& bytes) {
  try {
    DecodePpm(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a decode error";
  return ErrorCode::kInvalidArgument;
}

// Straight transcription of the half-pixel bilinear formula, one sample at a
// time.
uint8_t OracleSample(const RasterImage& img, int out_w, int out_h, int x,
                     int y, int c) {
  auto coord = [](int d, int src, int dst) {
    double s = (d + 0.5) * (static_cast<double>(src) / dst) - 0.5;
    if (s < 0) s = 0;
    if (s > src - 1) s = src - 1;
    return s;
  };
  const double sx = coord(x, img.width(), out_w);
  const double sy = coord(y, img.height(), out_h);
  const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = sx - x0, fy = sy - y0;
  const double top = img.at(x0, y0, c) * (1 - fx) + img.at(x1, y0, c) * fx;
  const double bot = img.at(x0, y1, c) * (1 - fx) + img.at(x1, y1, c) * fx;
  const double v = top * (1 - fy) + bot * fy;
  return static_cast<uint8_t>(std::floor(v + 0.5));
}

TEST(PpmTest, DecodesMinimalImage) {
  std::vector<uint8_t> bytes = Bytes("P6\n2 1\n255\n");
  const std::vector<uint8_t> payload = {1, 2, 3, 4, 5, 6};
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  const RasterImage img = DecodePpm(bytes);
  EXPECT_EQ(img.width(), 2);
  EXPECT_EQ(img.height(), 1);
  EXPECT_TRUE(std::equal(payload.begin(), payload.end(), img.pixels().begin()));
}

TEST(PpmTest, CommentsAreIgnored) {
  std::vector<uint8_t> plain = Bytes("P6\n2 1\n255\n");
  std::vector<uint8_t> commented = Bytes("P6\n# made by hand\n2 # w\n1\n255\n");
  for (auto* b : {&plain, &commented}) {
    b->insert(b->end(), {9, 8, 7, 6, 5, 4});
  }
  EXPECT_EQ(DecodePpm(plain), DecodePpm(commented));
}

TEST(PpmTest, RejectsMalformedInput) {
  EXPECT_EQ(CodeOf(Bytes("P3\n1 1\n255\n\1\1\1")), ErrorCode::kFormat);
  EXPECT_EQ(CodeOf(Bytes("P6\n1 1\n65535\n\1\1\1")), ErrorCode::kFormat);
  EXPECT_EQ(CodeOf(Bytes("P6\nx 1\n255\n\1\1\1")), ErrorCode::kFormat);
  EXPECT_EQ(CodeOf(Bytes("P6\n0 1\n255\n")), ErrorCode::kFormat);
}

TEST(PpmTest, TruncatedPayloadReportsOffset) {
  std::vector<uint8_t> bytes = Bytes("P6\n2 2\n255\n");
  bytes.resize(bytes.size() + 11);
  try {
    DecodePpm(bytes);
    FAIL() << "expected truncation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
}

TEST(PpmTest, EncodesExactHeader) {
  RasterImage white(1, 1, {255, 255, 255});
  const std::vector<uint8_t> expected = {'P', '6', '\n', '1', ' ', '1', '\n', '2',
                                         '5', '5', '\n', 0xFF, 0xFF, 0xFF};
  EXPECT_EQ(EncodePpm(white), expected);
}

TEST(PpmTest, FullSizePayloadLength) {
  const RasterImage img(700, 460);
  const std::string header = "P6\n700 460\n255\n";
  EXPECT_EQ(EncodePpm(img).size() - header.size(), 966000u);
}

TEST(PpmTest, RoundTripProperty) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + static_cast<int>(rng.NextBelow(40));
    const int h = 1 + static_cast<int>(rng.NextBelow(40));
    const RasterImage img = RandomImage(w, h, rng);
    EXPECT_EQ(DecodePpm(EncodePpm(img)), img);
  }
}

TEST(RasterImageTest, RejectsBadDimensions) {
  EXPECT_THROW(RasterImage(0, 3), Error);
  EXPECT_THROW(RasterImage(2, 2, std::vector<uint8_t>(11)), Error);
}

TEST(ResizeTest, ConstantImageStaysConstant) {
  RasterImage img(10, 10);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      img.at(x, y, 0) = 120;
      img.at(x, y, 1) = 33;
      img.at(x, y, 2) = 250;
    }
  }
  const RasterImage out = ResizeBilinear(img, 299, 299);
  ASSERT_EQ(out.width(), 299);
  ASSERT_EQ(out.height(), 299);
  for (int y = 0; y < 299; ++y) {
    for (int x = 0; x < 299; ++x) {
      ASSERT_EQ(out.at(x, y, 0), 120);
      ASSERT_EQ(out.at(x, y, 1), 33);
      ASSERT_EQ(out.at(x, y, 2), 250);
    }
  }
}

TEST(ResizeTest, IdentitySize) {
  SplitMix64 rng(3);
  const RasterImage img = RandomImage(17, 9, rng);
  EXPECT_EQ(ResizeBilinear(img, 17, 9), img);
}

TEST(ResizeTest, TwoPixelRampUpsampled) {
  RasterImage img(2, 1, {0, 0, 0, 255, 255, 255});
  const RasterImage out = ResizeBilinear(img, 4, 1);
  // Frozen from the scalar oracle: source coordinates -0.25 (clamped), 0.25,
  // 0.75, 1.25 (clamped).
  const uint8_t expected[] = {0, 64, 191, 255};
  for (int x = 0; x < 4; ++x) {
    EXPECT_EQ(OracleSample(img, 4, 1, x, 0, 0), expected[x]);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(x, 0, c), expected[x]);
  }
}

TEST(ResizeTest, MatchesScalarOracleOnRandomImages) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const RasterImage img = RandomImage(1 + static_cast<int>(rng.NextBelow(20)),
                                        1 + static_cast<int>(rng.NextBelow(20)),
                                        rng);
    const int ow = 1 + static_cast<int>(rng.NextBelow(30));
    const int oh = 1 + static_cast<int>(rng.NextBelow(30));
    const RasterImage out = ResizeBilinear(img, ow, oh);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        for (int c = 0; c < 3; ++c) {
          ASSERT_EQ(out.at(x, y, c), OracleSample(img, ow, oh, x, y, c));
        }
      }
    }
  }
}

TEST(ResizeTest, OutputWithinSourceRange) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const RasterImage img = RandomImage(1 + static_cast<int>(rng.NextBelow(16)),
                                        1 + static_cast<int>(rng.NextBelow(16)),
                                        rng);
    const RasterImage out =
        ResizeBilinear(img, 1 + static_cast<int>(rng.NextBelow(40)),
                       1 + static_cast<int>(rng.NextBelow(40)));
    for (int c = 0; c < 3; ++c) {
      uint8_t lo = 255, hi = 0, olo = 255, ohi = 0;
      for (size_t i = c; i < img.pixels().size(); i += 3) {
        lo = std::min(lo, img.pixels()[i]);
        hi = std::max(hi, img.pixels()[i]);
      }
      for (size_t i = c; i < out.pixels().size(); i += 3) {
        olo = std::min(olo, out.pixels()[i]);
        ohi = std::max(ohi, out.pixels()[i]);
      }
      EXPECT_GE(olo, lo);
      EXPECT_LE(ohi, hi);
    }
  }
}

TEST(ResizeTest, RejectsZeroTarget) {
  RasterImage img(2, 2);
  EXPECT_THROW(ResizeBilinear(img, 0, 4), Error);
  EXPECT_THROW(ResizeBilinear(img, 4, 0), Error);
}

}  // namespace
}  // namespace patchfuse
