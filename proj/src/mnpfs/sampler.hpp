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

#ifndef MNPFS_SAMPLER_HPP_
#define MNPFS_SAMPLER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mnpfs/choice_data.hpp"
#include "mnpfs/prior.hpp"
#include "mnpfs/random.hpp"
#include "mnpfs/spherical.hpp"
#include "mnpfs/types.hpp"

namespace mnpfs {

// kFactor samples the trace-restricted factor covariance; kIdentity fixes
// Sigma = I_J and skips the angle step.
enum class ModelVariant { kFactor, kIdentity };

std::string VariantName(ModelVariant variant);
ModelVariant ParseVariant(const std::string& name);

struct SamplerConfig {
  std::size_t total_iterations = 20000;
  std::size_t burn_in = 10000;
  std::size_t thinning = 1;
  // Prior beta ~ Normal(0, beta_prior_variance * I_K).
  double beta_prior_variance = 0.1;
  std::size_t block_size = 5;
  std::size_t adaptation_batch = 50;
  double target_low = 0.15;
  double target_high = 0.30;
  double initial_proposal_sd = 0.1;
  std::uint64_t seed = 1;
  ModelVariant variant = ModelVariant::kFactor;
  std::size_t q = 1;
  // When set, retained draws are appended to beta.csv / kappa.csv in this
  // directory every 1000 iterations.
  std::filesystem::path stream_directory;

  void Validate() const;
  std::size_t RetainedDraws() const { return (total_iterations - burn_in) / thinning; }
};

// Design quantities that stay fixed over a chain. The differenced design
// X_i = [u_i' (x) I_J | W_i] (u_i = intercept and individual covariates,
// W_i = T x_{i,a}) lets cross products be assembled from small
// precomputed sums instead of a pass over all observations.
class ChoiceModel {
 public:
  explicit ChoiceModel(const ChoiceDataset& data);

  std::size_t N() const { return n_; }
  std::size_t J() const { return j_; }
  std::size_t K() const { return k_; }
  const std::vector<int>& choices() const { return choices_; }
  void SetChoices(std::vector<int> choices);

  // sum_i X_i' P X_i.
  Matrix CrossProduct(const Matrix& precision) const;
  // sum_i X_i' P z_i for utilities Z (N x J).
  Vector CrossProductWith(const Matrix& precision, const RowMatrix& Z) const;
  // Rows X_i beta.
  RowMatrix Means(const Vector& beta) const;

 private:
  std::size_t n_, j_, k_, m_, k_a_;
  std::vector<int> choices_;
  Matrix u_;          // N x m
  RowMatrix w_;       // NJ x k_a
  Matrix utu_;        // m x m
  Matrix uw_;         // mJ x k_a, block c = sum_i u_ic W_i
  Matrix ww_;         // k_a^2 x J^2, column a + J b = vec(sum_i W_i[a,:]' W_i[b,:])
};

struct McmcState {
  Vector beta;
  AngleVector kappa;
  RowMatrix Z;  // N x J differenced utilities
  Matrix sigma;
  Vector log_scales;  // per-angle proposal log standard deviations
  std::vector<std::size_t> batch_accepted, batch_proposed;
  std::vector<std::size_t> total_accepted, total_proposed;
  std::size_t adaptation_batches = 0;
};

struct PosteriorDraws {
  ModelVariant variant = ModelVariant::kFactor;
  std::size_t J = 0;
  std::size_t q = 0;
  Matrix beta;   // draws x K
  Matrix kappa;  // draws x (n - 1); no columns for kIdentity
  Vector acceptance_rate;  // per angle, post burn-in
  double seconds_per_iteration = 0.0;
  SamplerConfig config;

  std::size_t count() const { return static_cast<std::size_t>(beta.rows()); }
  Matrix Sigma(std::size_t draw) const;
};

McmcState InitState(const ChoiceModel& model, const SamplerConfig& config, const CalibratedPrior* prior, Rng& rng);

void GibbsBeta(McmcState& state, const ChoiceModel& model, const Matrix& sigma, const Matrix& prior_precision,
               Rng& rng);

// One fixed-order sweep j = 1..J over every observation. Throws kNumerical
// on a non-positive conditional variance.
void GibbsLatentUtilities(McmcState& state, const ChoiceModel& model, const Matrix& sigma, Rng& rng);

// sum_i (z_i - X_i beta)(z_i - X_i beta)'.
Matrix ResidualScatter(const McmcState& state, const ChoiceModel& model);

// log p(Z | X, beta, Sigma) from the residual scatter; -inf when Sigma is
// not positive definite.
double LatentLogLikelihood(const Matrix& scatter, std::size_t N, const Matrix& sigma);

// log of the Metropolis-Hastings ratio for replacing the angles in `block`
// by the matching entries of `proposal`, including the truncated-normal
// proposal correction.
double LogAcceptanceRatio(const AngleVector& current, const AngleVector& proposal, std::span<const std::size_t> block,
                          const Vector& log_scales, const CalibratedPrior& prior, const Matrix& scatter,
                          std::size_t N, std::size_t J, std::size_t q);

// Random blocks of angles, each updated by a blocked random-walk MH step.
// Throws kInvariant when the current state has a non-finite posterior.
void MhAnglesSweep(McmcState& state, const ChoiceModel& model, const CalibratedPrior& prior,
                   const SamplerConfig& config, Rng& rng);

// Batch adaptation of the proposal scales toward the target acceptance
// band; resets the batch counters.
void AdaptProposals(McmcState& state, const SamplerConfig& config);

// Steps 1-3 once, without adaptation.
void Transition(McmcState& state, const ChoiceModel& model, const CalibratedPrior* prior, const SamplerConfig& config,
                const Matrix& prior_precision, Rng& rng);

PosteriorDraws RunChain(const ChoiceDataset& data, const SamplerConfig& config, const CalibratedPrior* prior);

}  // namespace mnpfs

#endif  // MNPFS_SAMPLER_HPP_
