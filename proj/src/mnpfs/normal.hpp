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

#ifndef MNPFS_NORMAL_HPP_
#define MNPFS_NORMAL_HPP_

#include <cmath>
#include <numbers>

namespace mnpfs {

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

inline double NormalLogPdf(double x) { return -0.5 * x * x - kLogSqrtTwoPi; }

inline double NormalPdf(double x) { return std::exp(NormalLogPdf(x)); }

inline double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// 1 - Phi(x), accurate in the upper tail.
inline double NormalUpperTail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Inverse standard normal CDF (Wichura's AS241, relative accuracy ~1e-16).
// Returns -inf / +inf at p = 0 / 1 and NaN outside [0, 1].
double NormalQuantile(double p);

}  // namespace mnpfs

#endif  // MNPFS_NORMAL_HPP_
