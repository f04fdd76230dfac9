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
#include <cstdint>
#include <utility>

#include "patchfuse/error.h"

namespace patchfuse {

int GridSide(int level) {
  if (level < kMinLevel || level > kMaxLevel) {
    throw Error(ErrorCode::kInvalidArgument,
                "quadtree level must be in [1, 3], got " +
                    std::to_string(level));
  }
  return 1 << (level - 1);
}

std::vector<int> CutPoints(int dim, int side) {
  std::vector<int> cuts(side + 1);
  for (int i = 0; i <= side; ++i) {
    cuts[i] = static_cast<int>(static_cast<int64_t>(dim) * i / side);
  }
  return cuts;
}

PatchSet SplitImage(const RasterImage& image, int level, std::string parent_id) {
  const int side = GridSide(level);
  if (image.width() < side || image.height() < side) {
    throw Error(ErrorCode::kInvalidArgument,
                "image " + std::to_string(image.width()) + "x" +
                    std::to_string(image.height()) +
                    " too small for quadtree level " + std::to_string(level));
  }
  const std::vector<int> xs = CutPoints(image.width(), side);
  const std::vector<int> ys = CutPoints(image.height(), side);
  PatchSet out{std::move(parent_id), level, {}};
  out.patches.reserve(static_cast<size_t>(side) * side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      out.patches.push_back(
          {image.Crop(xs[c], ys[r], xs[c + 1] - xs[c], ys[r + 1] - ys[r]), r,
           c});
    }
  }
  return out;
}

RasterImage Reassemble(const PatchSet& patches, int parent_width,
                       int parent_height) {
  const int side = GridSide(patches.level);
  if (patches.patches.size() != static_cast<size_t>(side) * side) {
    throw Error(ErrorCode::kInvalidArgument,
                "patch count " + std::to_string(patches.patches.size()) +
                    " does not match level " + std::to_string(patches.level));
  }
  if (parent_width < side || parent_height < side) {
    throw Error(ErrorCode::kInvalidArgument,
                "declared parent size too small for level");
  }
  const std::vector<int> xs = CutPoints(parent_width, side);
  const std::vector<int> ys = CutPoints(parent_height, side);
  RasterImage out(parent_width, parent_height);
  std::vector<bool> seen(static_cast<size_t>(side) * side, false);
  for (const Patch& p : patches.patches) {
    if (p.row < 0 || p.row >= side || p.col < 0 || p.col >= side) {
      throw Error(ErrorCode::kInvalidArgument, "patch grid position out of range");
    }
    const size_t slot = static_cast<size_t>(p.row) * side + p.col;
    if (seen[slot]) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate patch grid position");
    }
    seen[slot] = true;
    const int w = xs[p.col + 1] - xs[p.col];
    const int h = ys[p.row + 1] - ys[p.row];
    if (p.image.width() != w || p.image.height() != h) {
      throw Error(ErrorCode::kInvalidArgument,
                  "patch R" + std::to_string(p.row) + "C" +
                      std::to_string(p.col) + " is " +
                      std::to_string(p.image.width()) + "x" +
                      std::to_string(p.image.height()) + ", expected " +
                      std::to_string(w) + "x" + std::to_string(h) +
                      " for the declared parent size");
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int ch = 0; ch < RasterImage::kChannels; ++ch) {
          out.at(xs[p.col] + x, ys[p.row] + y, ch) = p.image.at(x, y, ch);
        }
      }
    }
  }
  return out;
}

std::string PatchId(std::string_view parent_id, int level, int row, int col) {
  std::string id(parent_id);
  id += "#L" + std::to_string(level) + "R" + std::to_string(row) + "C" +
        std::to_string(col);
  return id;
}

std::vector<std::string> PatchIds(std::string_view parent_id, int level) {
  const int side = GridSide(level);
  std::vector<std::string> ids;
  ids.reserve(static_cast<size_t>(side) * side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) ids.push_back(PatchId(parent_id, level, r, c));
  }
  return ids;
}

}  // namespace patchfuse
