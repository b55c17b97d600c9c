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

#ifndef MNPFS_FLEXIBLE_DENSITY_HPP_
#define MNPFS_FLEXIBLE_DENSITY_HPP_

#include "mnpfs/random.hpp"

namespace mnpfs {

// Yeo-Johnson power transform t_eta(v). The log branches at eta = 0
// (v >= 0) and eta = 2 (v < 0) are the analytic limits of the power
// branches; expm1/log1p keep the transition to them smooth.
double YeoJohnson(double v, double eta);
double YeoJohnsonDerivative(double v, double eta);
double LogYeoJohnsonDerivative(double v, double eta);
// Inverse of YeoJohnson for eta in [0, 2], where t_eta maps R onto R.
double YeoJohnsonInverse(double x, double eta);

// One margin of the angle prior. kappa in (0, upper_bound) is warped to the
// real line by G(kappa) = Phi^{-1}(kappa / upper_bound), standardized with
// (mu, tau), and pushed through t_eta onto a standard normal.
struct FlexibleMargin {
  double mu = 0.0;
  double tau = 1.0;
  double eta = 1.0;
  double upper_bound = 0.0;
};

// Warp G and log G'.
double AngleWarp(double kappa, double upper_bound);
double LogAngleWarpDerivative(double kappa, double upper_bound);

// Log density of the margin. Returns -inf on the boundary points 0 and
// upper_bound (where G diverges); throws kInvalidArgument outside them.
double FlexibleLogPdf(double kappa, const FlexibleMargin& margin);

// Log density given the precomputed warp g = G(kappa), without the
// lambda-free log G'(kappa) term.
double FlexibleLogPdfWarped(double g, const FlexibleMargin& margin);

double FlexibleCdf(double kappa, const FlexibleMargin& margin);

// Exact draw by inverting the transform chain, kept strictly inside the
// domain.
double SampleFlexible(const FlexibleMargin& margin, Rng& rng);

}  // namespace mnpfs

#endif  // MNPFS_FLEXIBLE_DENSITY_HPP_
