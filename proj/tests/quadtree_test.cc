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

#include "patchfuse/quadtree.h"

#include <algorithm>
#include <set>
#include <utility>

#include "gtest/gtest.h"
#include "patchfuse/error.h"
#include "patchfuse/rng.h"

namespace patchfuse {
namespace {

RasterImage RandomImage(int w, int h, SplitMix64& rng) {
  RasterImage img(w, h);
  for (uint8_t& v : img.mutable_pixels()) v = static_cast<uint8_t>(rng.Next());
  return img;
}

TEST(QuadtreeTest, DatasetResolutionLevelTwo) {
  const PatchSet set = SplitImage(RasterImage(700, 460), 2, "img");
  ASSERT_EQ(set.patches.size(), 4u);
  for (const Patch& p : set.patches) {
    EXPECT_EQ(p.image.width(), 350);
    EXPECT_EQ(p.image.height(), 230);
  }
}

TEST(QuadtreeTest, DatasetResolutionLevelThree) {
  const PatchSet set = SplitImage(RasterImage(700, 460), 3, "img");
  ASSERT_EQ(set.patches.size(), 16u);
  for (const Patch& p : set.patches) {
    EXPECT_EQ(p.image.width(), 175);
    EXPECT_EQ(p.image.height(), 115);
  }
}

TEST(QuadtreeTest, FloorCutsOnOddSize) {
  const PatchSet set = SplitImage(RasterImage(5, 5), 2);
  ASSERT_EQ(set.patches.size(), 4u);
  const std::pair<int, int> expected[] = {{2, 2}, {3, 2}, {2, 3}, {3, 3}};
  for (size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(set.patches[i].image.width(), expected[i].first) << i;
    EXPECT_EQ(set.patches[i].image.height(), expected[i].second) << i;
  }
}

TEST(QuadtreeTest, LevelOneIsIdentity) {
  SplitMix64 rng(1);
  const RasterImage img = RandomImage(7, 3, rng);
  const PatchSet set = SplitImage(img, 1, "x");
  ASSERT_EQ(set.patches.size(), 1u);
  EXPECT_EQ(set.patches[0].image, img);
  EXPECT_EQ(set.patches[0].row, 0);
  EXPECT_EQ(set.patches[0].col, 0);
}

TEST(QuadtreeTest, RowMajorOrder) {
  const PatchSet set = SplitImage(RasterImage(8, 8), 3);
  for (size_t i = 0; i < set.patches.size(); ++i) {
    EXPECT_EQ(set.patches[i].row, static_cast<int>(i / 4));
    EXPECT_EQ(set.patches[i].col, static_cast<int>(i % 4));
  }
}

TEST(QuadtreeTest, RejectsBadLevelsAndTinyImages) {
  EXPECT_THROW(SplitImage(RasterImage(8, 8), 0), Error);
  EXPECT_THROW(SplitImage(RasterImage(8, 8), 4), Error);
  EXPECT_THROW(SplitImage(RasterImage(3, 8), 3), Error);
  EXPECT_THROW(SplitImage(RasterImage(1, 1), 2), Error);
  EXPECT_NO_THROW(SplitImage(RasterImage(4, 4), 3));
}

TEST(QuadtreeTest, ReassembleRejectsWrongParentSize) {
  const PatchSet set = SplitImage(RasterImage(10, 10), 2);
  EXPECT_THROW(Reassemble(set, 11, 10), Error);
  EXPECT_THROW(Reassemble(set, 10, 8), Error);
}

TEST(QuadtreeTest, PartitionProperty) {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int level = 1 + static_cast<int>(rng.NextBelow(3));
    const int side = GridSide(level);
    const int w = side + static_cast<int>(rng.NextBelow(64 - side + 1));
    const int h = side + static_cast<int>(rng.NextBelow(64 - side + 1));
    const RasterImage img = RandomImage(w, h, rng);
    const PatchSet set = SplitImage(img, level);
    ASSERT_EQ(set.patches.size(), static_cast<size_t>(side * side));
    ASSERT_EQ(Reassemble(set, w, h), img);

    std::set<std::pair<int, int>> cells;
    int min_w = w, max_w = 0, min_h = h, max_h = 0;
    for (const Patch& p : set.patches) {
      cells.insert({p.row, p.col});
      min_w = std::min(min_w, p.image.width());
      max_w = std::max(max_w, p.image.width());
      min_h = std::min(min_h, p.image.height());
      max_h = std::max(max_h, p.image.height());
    }
    EXPECT_EQ(cells.size(), set.patches.size());
    EXPECT_LE(max_w - min_w, 1);
    EXPECT_LE(max_h - min_h, 1);
  }
}

TEST(PatchIdTest, Format) {
  EXPECT_EQ(PatchId("SOB_B_A-1-40-001", 3, 2, 1), "SOB_B_A-1-40-001#L3R2C1");
  const auto ids = PatchIds("img", 2);
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(ids.front(), "img#L2R0C0");
  EXPECT_EQ(ids.back(), "img#L2R1C1");
  EXPECT_EQ(PatchIds("img", 1), std::vector<std::string>{"img#L1R0C0"});
}

}  // namespace
}  // namespace patchfuse
