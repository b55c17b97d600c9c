/*
 * Copyright 2026 The mnpfs Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MNPFS_RANDOM_HPP_
#define MNPFS_RANDOM_HPP_

#include <cstdint>
#include <random>

#include "mnpfs/normal.hpp"

namespace mnpfs {

using Rng = std::mt19937_64;

// Independent, reproducible stream for (seed, stream). Work that is split
// into chunks seeds one stream per chunk so results do not depend on how
// many threads execute the chunks.
inline Rng MakeRng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6d6e7066u};
  return Rng(seq);
}

// Uniform on the open interval (0, 1).
inline double UniformOpen(Rng& rng) {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * kScale;
    if (u > 0.0) return u;
  }
}

// Inversion keeps every draw a function of its own stream only.
inline double StandardNormal(Rng& rng) { return NormalQuantile(UniformOpen(rng)); }

}  // namespace mnpfs

#endif  // MNPFS_RANDOM_HPP_
