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

#include "mnpfs/spherical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mnpfs/error.hpp"

namespace mnpfs {

std::size_t NumFreeParams(std::size_t J, std::size_t q) {
  if (q < 1 || q >= J) {
    Fail(ErrorCode::kInvalidArgument,
         "factor count q=" + std::to_string(q) + " must satisfy 1 <= q < J=" + std::to_string(J));
  }
  return J * (q + 1) - q * (q - 1) / 2;
}

Matrix FactorCovariance::Sigma() const {
  Matrix sigma = gamma * gamma.transpose();
  sigma.diagonal() += d.array().square().matrix();
  return sigma;
}

double AngleUpperBound(std::size_t l, std::size_t count) {
  return l + 1 == count ? 2.0 * std::numbers::pi : std::numbers::pi;
}

bool AnglesInDomain(const AngleVector& kappa) {
  const std::size_t m = kappa.size();
  for (std::size_t l = 0; l < m; ++l) {
    const double k = kappa.values(static_cast<Eigen::Index>(l));
    if (!(k >= 0.0 && k < AngleUpperBound(l, m))) return false;
  }
  return true;
}

PsiVector PsiFromAngles(const AngleVector& kappa, double J) {
  const auto m = kappa.values.size();
  PsiVector psi{Vector(m + 1)};
  double running = std::sqrt(J);  // sqrt(J) * prod_{j<l} sin(kappa_j)
  for (Eigen::Index l = 0; l < m; ++l) {
    psi.values(l) = running * std::cos(kappa.values(l));
    running *= std::sin(kappa.values(l));
  }
  psi.values(m) = running;
  return psi;
}

AngleVector AnglesFromPsi(const PsiVector& psi) {
  const auto n = psi.values.size();
  Require(n >= 2, "psi must have at least two entries");
  AngleVector kappa{Vector(n - 1)};
  // Tail sums from the back avoid cancellation.
  Vector tail(n);
  double acc = 0.0;
  for (Eigen::Index l = n - 1; l >= 0; --l) {
    acc += psi.values(l) * psi.values(l);
    tail(l) = acc;
  }
  for (Eigen::Index l = 0; l < n - 1; ++l) {
    if (!(tail(l) > 0.0)) {
      Fail(ErrorCode::kDegenerate, "psi tail from entry " + std::to_string(l + 1) + " is zero");
    }
    const double c = std::clamp(psi.values(l) / std::sqrt(tail(l)), -1.0, 1.0);
    double angle = std::acos(c);
    if (l == n - 2 && psi.values(n - 1) < 0.0) angle = 2.0 * std::numbers::pi - angle;
    kappa.values(l) = angle;
  }
  return kappa;
}

FactorCovariance FactorFromPsi(const PsiVector& psi, std::size_t J, std::size_t q) {
  const std::size_t n = NumFreeParams(J, q);
  if (psi.size() != n) {
    Fail(ErrorCode::kMismatch,
         "psi has " + std::to_string(psi.size()) + " entries, expected " + std::to_string(n));
  }
  const auto Ji = static_cast<Eigen::Index>(J);
  FactorCovariance f{Matrix::Zero(Ji, static_cast<Eigen::Index>(q)), psi.values.head(Ji)};
  Eigen::Index pos = Ji;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(q); ++k) {
    for (Eigen::Index j = k; j < Ji; ++j) f.gamma(j, k) = psi.values(pos++);
  }
  return f;
}

PsiVector PsiFromFactor(const FactorCovariance& factor) {
  const auto J = static_cast<Eigen::Index>(factor.J());
  const auto q = static_cast<Eigen::Index>(factor.q());
  Require(factor.gamma.rows() == J, "gamma must have J rows");
  PsiVector psi{Vector(static_cast<Eigen::Index>(NumFreeParams(factor.J(), factor.q())))};
  psi.values.head(J) = factor.d;
  Eigen::Index pos = J;
  for (Eigen::Index k = 0; k < q; ++k) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (factor.gamma(j, k) != 0.0) {
        Fail(ErrorCode::kInvalidArgument, "gamma has a nonzero entry above its diagonal at (" +
                                              std::to_string(j + 1) + "," + std::to_string(k + 1) + ")");
      }
    }
    for (Eigen::Index j = k; j < J; ++j) psi.values(pos++) = factor.gamma(j, k);
  }
  return psi;
}

Matrix CovarianceFromAngles(const AngleVector& kappa, std::size_t J, std::size_t q) {
  return FactorFromPsi(PsiFromAngles(kappa, static_cast<double>(J)), J, q).Sigma();
}

Matrix CorrelationFromCovariance(const Matrix& sigma) {
  Require(sigma.rows() == sigma.cols(), "covariance must be square");
  const Vector diag = sigma.diagonal();
  for (Eigen::Index j = 0; j < diag.size(); ++j) {
    if (!(diag(j) > 0.0)) {
      Fail(ErrorCode::kInvalidArgument, "non-positive variance at diagonal entry " + std::to_string(j + 1));
    }
  }
  const Vector inv_sd = diag.array().rsqrt();
  Matrix rho = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
  rho = rho.cwiseMax(-1.0).cwiseMin(1.0);
  rho.diagonal().setOnes();
  return rho;
}

}  // namespace mnpfs
