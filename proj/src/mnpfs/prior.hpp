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

#ifndef MNPFS_PRIOR_HPP_
#define MNPFS_PRIOR_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mnpfs/flexible_density.hpp"
#include "mnpfs/optimize.hpp"
#include "mnpfs/random.hpp"
#include "mnpfs/spherical.hpp"

namespace mnpfs {

// Hyperparameters of the unrestricted factor prior: loadings
// ~ Normal(mu_gamma, sigma_gamma^2), squared idiosyncratic scales
// ~ Inverse-Gamma(nu, nu - 1) so that their prior mean is one.
struct Hyperparameters {
  double mu_gamma = 0.0;
  double sigma_gamma = 1.0;
  double nu = 5.0;
  std::size_t q = 1;

  double rate() const { return nu - 1.0; }
};

// Draw of psi_ddot = (d_ddot', vech(gamma_ddot)')' from the unrestricted
// prior; d_ddot is the positive square root of its Inverse-Gamma draw.
Vector SampleUnrestrictedPsi(const Hyperparameters& theta, std::size_t J, Rng& rng);

// Rescales onto the sphere of radius sqrt(J). Throws kDegenerate on a
// zero vector.
PsiVector ProjectToSphere(const Vector& psi_ddot, double J);

// Product-of-margins approximation to the angle prior implied by theta.
struct CalibratedPrior {
  std::size_t J = 0;
  std::size_t q = 0;
  Hyperparameters theta;
  std::size_t M = 0;
  std::uint64_t seed = 0;
  std::vector<FlexibleMargin> margins;
  // Per-margin diagnostics; empty when loaded from disk.
  std::vector<double> avg_loglik;
  std::vector<double> ks_distance;

  std::size_t num_angles() const { return margins.size(); }
  void Validate() const;
};

struct CalibrationOptions {
  std::size_t M = 100000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  int restarts = 3;
  // Restarts run on a subsample of this size; the best start is then
  // polished on all M draws.
  std::size_t restart_subsample = 10000;
  std::size_t ks_draws = 20000;
  NelderMeadOptions optimizer;
};

// M draws of the angles implied by theta: one row per draw, one column per
// angle. Draws are produced in fixed-size chunks with one RNG stream each,
// so the result does not depend on `threads`.
Matrix DrawPriorAngles(const Hyperparameters& theta, std::size_t J, std::size_t M, std::uint64_t seed,
                       std::size_t threads);

struct MarginFit {
  FlexibleMargin margin;
  double avg_loglik = 0.0;
  bool converged = false;
};

// Maximizes the average log density of one margin over (mu, log tau, eta),
// eta restricted to [0, 2]. Draws within 1e-12 of the domain boundary are
// nudged inside.
MarginFit FitMargin(std::span<const double> draws, double upper_bound, const CalibrationOptions& options,
                    Rng& rng);

// Throws kConvergence naming the first margin whose fit did not converge.
CalibratedPrior CalibratePrior(const Hyperparameters& theta, std::size_t J, const CalibrationOptions& options);

// Margins of the uniform density on the angle domain (eta = 1, mu = 0,
// tau = 1).
CalibratedPrior UniformAnglePrior(std::size_t J, std::size_t q);

AngleVector SampleCalibratedAngles(const CalibratedPrior& prior, Rng& rng);

// Sum of the margin log densities. Throws kInvalidArgument on a size
// mismatch or an angle outside its domain.
double LogPriorKappa(const AngleVector& kappa, const CalibratedPrior& prior);

// Monte Carlo mean of the prior correlation between two fully loaded rows.
double MeanPriorCorrelation(double mu_gamma, double sigma_gamma, double nu, std::size_t q,
                            std::size_t draws, std::uint64_t seed);

// mu_gamma >= 0 at which the prior mean correlation is 1/2, i.e. the prior
// mean of Sigma is (I + 11')/2. Uses common random numbers across mu so the
// Monte Carlo objective is smooth and monotone. Throws kConvergence when no
// bracket is found.
double SolveEquicorrelatedMu(double sigma_gamma, double nu, std::size_t q, std::size_t draws,
                             std::uint64_t seed);

// Plain-text prior file: a versioned header followed by one line per margin
// "l, mu, tau, eta, bound". Numbers are written in shortest round-trip form.
void SavePrior(const CalibratedPrior& prior, const std::filesystem::path& path);
CalibratedPrior LoadPrior(const std::filesystem::path& path);

// Cache file name for (J, q, theta, M, seed) inside dir.
std::filesystem::path PriorCachePath(const std::filesystem::path& dir, const Hyperparameters& theta,
                                     std::size_t J, std::size_t M, std::uint64_t seed);

// Loads the cached prior for these settings or calibrates and stores it.
CalibratedPrior LoadOrCalibratePrior(const std::filesystem::path& cache_dir, const Hyperparameters& theta,
                                     std::size_t J, const CalibrationOptions& options);

}  // namespace mnpfs

#endif  // MNPFS_PRIOR_HPP_
