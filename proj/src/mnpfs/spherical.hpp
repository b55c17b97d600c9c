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

#ifndef MNPFS_SPHERICAL_HPP_
#define MNPFS_SPHERICAL_HPP_

#include <cstddef>

#include "mnpfs/types.hpp"

namespace mnpfs {

// Number of free covariance parameters n = J(q+1) - q(q-1)/2 of the
// J-dimensional q-factor structure. Requires 1 <= q < J.
std::size_t NumFreeParams(std::size_t J, std::size_t q);

// Loadings (J x q, zero above the diagonal) and idiosyncratic scales.
// The covariance is gamma gamma' + diag(d)^2; signs of d and of gamma's
// columns are not identified and are left as produced.
struct FactorCovariance {
  Matrix gamma;
  Vector d;

  std::size_t J() const { return static_cast<std::size_t>(d.size()); }
  std::size_t q() const { return static_cast<std::size_t>(gamma.cols()); }
  Matrix Sigma() const;
};

// psi = (d', vech(gamma)')' with sum(psi^2) = trace(Sigma).
struct PsiVector {
  Vector values;
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// Spherical angles of psi. All but the last lie in [0, pi); the last lies
// in [0, 2 pi).
struct AngleVector {
  Vector values;
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// Upper domain bound of angle l out of `count` angles.
double AngleUpperBound(std::size_t l, std::size_t count);

bool AnglesInDomain(const AngleVector& kappa);

// Point on the sphere of radius sqrt(J) with the given angles.
PsiVector PsiFromAngles(const AngleVector& kappa, double J);

// Angles of psi (any positive radius). Throws kDegenerate when a tail
// psi_l..psi_n is identically zero, which leaves an angle undefined.
AngleVector AnglesFromPsi(const PsiVector& psi);

FactorCovariance FactorFromPsi(const PsiVector& psi, std::size_t J, std::size_t q);

// Throws kInvalidArgument if gamma has a nonzero entry above its diagonal.
PsiVector PsiFromFactor(const FactorCovariance& factor);

Matrix CovarianceFromAngles(const AngleVector& kappa, std::size_t J, std::size_t q);

// Throws kInvalidArgument on a non-positive diagonal entry.
Matrix CorrelationFromCovariance(const Matrix& sigma);

}  // namespace mnpfs

#endif  // MNPFS_SPHERICAL_HPP_
