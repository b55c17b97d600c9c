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

#include "mnpfs/truncated_normal.hpp"

#include <algorithm>
#include <cmath>

#include "mnpfs/normal.hpp"

namespace mnpfs {

double SampleStandardTailAbove(double a, Rng& rng) {
  if (a < kTailSwitch) {
    // x = -Phi^{-1}(u * Phi(-a)) keeps full precision up to the switch.
    const double mass = NormalUpperTail(a);
    const double x = -NormalQuantile(UniformOpen(rng) * mass);
    return std::max(x, a);
  }
  // Robert (1995): translated exponential proposal with the optimal rate.
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(UniformOpen(rng)) / rate;
    const double d = z - rate;
    if (std::log(UniformOpen(rng)) <= -0.5 * d * d) return z;
  }
}

double SampleTruncatedBelow(double mean, double sd, double lower, Rng& rng) {
  return mean + sd * SampleStandardTailAbove((lower - mean) / sd, rng);
}

double SampleTruncatedAbove(double mean, double sd, double upper, Rng& rng) {
  return mean - sd * SampleStandardTailAbove((mean - upper) / sd, rng);
}

double SampleTruncatedInterval(double mean, double sd, double low, double high, Rng& rng) {
  const double a = (low - mean) / sd;
  const double b = (high - mean) / sd;
  double x;
  if (a > 0.0) {
    // Entire interval in the upper half: invert with upper-tail masses.
    const double qa = NormalUpperTail(a);
    const double qb = NormalUpperTail(b);
    x = -NormalQuantile(qb + UniformOpen(rng) * (qa - qb));
  } else {
    const double pa = NormalCdf(a);
    const double pb = NormalCdf(b);
    x = NormalQuantile(pa + UniformOpen(rng) * (pb - pa));
  }
  x = std::clamp(x, a, b);
  double value = mean + sd * x;
  // Keep the draw strictly inside the open interval.
  if (value <= low) value = std::nextafter(low, high);
  if (value >= high) value = std::nextafter(high, low);
  return value;
}

double LogIntervalMass(double mean, double sd, double low, double high) {
  const double a = (low - mean) / sd;
  const double b = (high - mean) / sd;
  if (a > 0.0) return std::log(NormalUpperTail(a) - NormalUpperTail(b));
  return std::log(NormalCdf(b) - NormalCdf(a));
}

}  // namespace mnpfs
