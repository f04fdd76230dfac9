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

#ifndef PATCHFUSE_QUADTREE_H_
#define PATCHFUSE_QUADTREE_H_

#include <string>
#include <string_view>
#include <vector>

#include "patchfuse/raster.h"

namespace patchfuse {

inline constexpr int kMinLevel = 1;
inline constexpr int kMaxLevel = 3;

struct Patch {
  RasterImage image;
  int row;
  int col;
};

// Quadtree tiling of one image at one level. Level 1 is the image itself,
// level L is a 2^(L-1) x 2^(L-1) grid. Patches are stored row-major.
struct PatchSet {
  std::string parent_id;
  int level;
  std::vector<Patch> patches;
};

// Number of patches along one axis at `level`.
int GridSide(int level);

// Cut points floor(dim * i / side) for i = 0..side.
std::vector<int> CutPoints(int dim, int side);

// Throws Error(kInvalidArgument) for a level outside [1, 3] or an image
// smaller than the grid in either axis.
PatchSet SplitImage(const RasterImage& image, int level,
               std::string parent_id = {});

// Inverse of SplitImage. Throws Error(kInvalidArgument) when the patches do not
// tile a parent_width x parent_height image.
RasterImage Reassemble(const PatchSet& patches, int parent_width,
                       int parent_height);

// Cache identifier of a patch: "<parent_id>#L<level>R<row>C<col>".
std::string PatchId(std::string_view parent_id, int level, int row, int col);

// All patch identifiers of `parent_id` at `level`, in row-major order.
std::vector<std::string> PatchIds(std::string_view parent_id, int level);

}  // namespace patchfuse

#endif  // PATCHFUSE_QUADTREE_H_
