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

#ifndef MNPFS_TRUNCATED_NORMAL_HPP_
#define MNPFS_TRUNCATED_NORMAL_HPP_

#include "mnpfs/random.hpp"

namespace mnpfs {

// Standardized truncation points beyond this use exponential rejection
// instead of inversion.
inline constexpr double kTailSwitch = 4.0;

// Standard normal conditioned on x > a.
double SampleStandardTailAbove(double a, Rng& rng);

// Normal(mean, sd^2) conditioned on x > lower.
double SampleTruncatedBelow(double mean, double sd, double lower, Rng& rng);

// Normal(mean, sd^2) conditioned on x < upper.
double SampleTruncatedAbove(double mean, double sd, double upper, Rng& rng);

// Normal(mean, sd^2) conditioned on low < x < high. Intended for intervals
// that contain (or lie close to) the mean, as random-walk proposals do.
double SampleTruncatedInterval(double mean, double sd, double low, double high, Rng& rng);

// log[Phi((high - mean) / sd) - Phi((low - mean) / sd)].
double LogIntervalMass(double mean, double sd, double low, double high);

}  // namespace mnpfs

#endif  // MNPFS_TRUNCATED_NORMAL_HPP_
