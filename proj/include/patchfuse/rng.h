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

#ifndef PATCHFUSE_RNG_H_
#define PATCHFUSE_RNG_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace patchfuse {

// SplitMix64 generator. All randomness in the library flows through this so
// that results are reproducible bit-for-bit independent of the standard
// library's distribution implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t Next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double NextUnit() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double NextUniform(double lo, double hi) {
    return lo + (hi - lo) * NextUnit();
  }

  // Uniform integer in [0, bound), bound > 0. Rejection sampling removes the
  // modulo bias.
  uint64_t NextBelow(uint64_t bound) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
      x = Next();
    } while (x >= limit);
    return x % bound;
  }

 private:
  uint64_t state_;
};

// Fisher-Yates shuffle driven by `rng`.
template <typename T>
void Shuffle(std::span<T> items, SplitMix64& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.NextBelow(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace patchfuse

#endif  // PATCHFUSE_RNG_H_
