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

#include "mnpfs/flexible_density.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mnpfs/error.hpp"
#include "mnpfs/normal.hpp"

namespace mnpfs {

namespace {

constexpr double kEtaEps = 1e-12;

}  // namespace

double YeoJohnson(double v, double eta) {
  if (v >= 0.0) {
    const double l = std::log1p(v);
    if (std::fabs(eta) < kEtaEps) return l;
    return std::expm1(eta * l) / eta;
  }
  const double l = std::log1p(-v);
  const double e = 2.0 - eta;
  if (std::fabs(e) < kEtaEps) return -l;
  return -std::expm1(e * l) / e;
}

double LogYeoJohnsonDerivative(double v, double eta) {
  if (v >= 0.0) return (eta - 1.0) * std::log1p(v);
  return (1.0 - eta) * std::log1p(-v);
}

double YeoJohnsonDerivative(double v, double eta) { return std::exp(LogYeoJohnsonDerivative(v, eta)); }

double YeoJohnsonInverse(double x, double eta) {
  if (x >= 0.0) {
    if (std::fabs(eta) < kEtaEps) return std::expm1(x);
    return std::expm1(std::log1p(eta * x) / eta);
  }
  const double e = 2.0 - eta;
  if (std::fabs(e) < kEtaEps) return -std::expm1(-x);
  return -std::expm1(std::log1p(-e * x) / e);
}

double AngleWarp(double kappa, double upper_bound) { return NormalQuantile(kappa / upper_bound); }

double LogAngleWarpDerivative(double kappa, double upper_bound) {
  return -std::log(upper_bound) - NormalLogPdf(AngleWarp(kappa, upper_bound));
}

double FlexibleLogPdfWarped(double g, const FlexibleMargin& m) {
  const double u = (g - m.mu) / m.tau;
  const double x = YeoJohnson(u, m.eta);
  return NormalLogPdf(x) + LogYeoJohnsonDerivative(u, m.eta) - std::log(m.tau);
}

double FlexibleLogPdf(double kappa, const FlexibleMargin& margin) {
  if (!(kappa >= 0.0 && kappa <= margin.upper_bound)) {
    Fail(ErrorCode::kInvalidArgument,
         "angle " + std::to_string(kappa) + " outside [0, " + std::to_string(margin.upper_bound) + ")");
  }
  if (kappa == 0.0 || kappa == margin.upper_bound) return -std::numeric_limits<double>::infinity();
  const double g = AngleWarp(kappa, margin.upper_bound);
  if (!std::isfinite(g)) return -std::numeric_limits<double>::infinity();
  return FlexibleLogPdfWarped(g, margin) - std::log(margin.upper_bound) - NormalLogPdf(g);
}

double FlexibleCdf(double kappa, const FlexibleMargin& m) {
  if (kappa <= 0.0) return 0.0;
  if (kappa >= m.upper_bound) return 1.0;
  const double u = (AngleWarp(kappa, m.upper_bound) - m.mu) / m.tau;
  return NormalCdf(YeoJohnson(u, m.eta));
}

double SampleFlexible(const FlexibleMargin& m, Rng& rng) {
  const double x = StandardNormal(rng);
  const double g = m.mu + m.tau * YeoJohnsonInverse(x, m.eta);
  double kappa = m.upper_bound * NormalCdf(g);
  if (!(kappa > 0.0)) kappa = std::numeric_limits<double>::min();
  if (kappa >= m.upper_bound) kappa = std::nextafter(m.upper_bound, 0.0);
  return kappa;
}

}  // namespace mnpfs
