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

#ifndef MNPFS_EVALUATION_HPP_
#define MNPFS_EVALUATION_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mnpfs/choice_data.hpp"
#include "mnpfs/sampler.hpp"
#include "mnpfs/types.hpp"

namespace mnpfs {

// Per-observation probabilities over the J + 1 categories (columns in
// internal category order).
struct PredictivePmf {
  Matrix probs;
  std::size_t samples = 0;  // simulated choices per observation, M * R

  std::size_t N() const { return static_cast<std::size_t>(probs.rows()); }
  std::size_t categories() const { return static_cast<std::size_t>(probs.cols()); }
};

// Frequencies over `total` simulated choices, smoothed by alpha = 1/total
// and renormalized.
Vector SmoothedFrequencies(std::span<const std::size_t> counts, std::size_t total);

// Simulates R utility vectors per parameter draw for every observation.
// `betas` holds one draw per row; `sigma_factors` holds the lower Cholesky
// factor of Sigma for each draw, or is empty for Sigma = I. Every
// observation uses its own RNG stream, so the result does not depend on
// the thread count.
PredictivePmf SimulatePmf(const ChoiceDataset& data, const Matrix& betas, const std::vector<Matrix>& sigma_factors,
                          std::size_t R, std::uint64_t seed, std::size_t threads);

// Predictive pmf from posterior draws. max_draws > 0 uses that many evenly
// spaced draws.
PredictivePmf PredictivePmfFromDraws(const ChoiceDataset& data, const PosteriorDraws& draws, std::size_t R,
                                     std::uint64_t seed, std::size_t threads, std::size_t max_draws = 0);

// In-sample category frequencies of the training choices, smoothed with
// alpha = 1 / N_train, repeated for `rows` observations.
PredictivePmf NaiveForecast(std::span<const int> train_choices, std::size_t num_categories, std::size_t rows);

// Mode of each pmf row, lowest category on ties.
std::vector<int> PmfModes(const PredictivePmf& pmf);
std::vector<int> HitIndicators(const PredictivePmf& pmf, std::span<const int> truths);
double HitRate(const PredictivePmf& pmf, std::span<const int> truths);
std::vector<double> LogProbabilities(const PredictivePmf& pmf, std::span<const int> truths);
double LogScore(const PredictivePmf& pmf, std::span<const int> truths);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate_variance = false;
};

// Paired normal test for a hit-rate difference: z = (b - c) / sqrt(b + c)
// with b (c) the observations only A (only B) predicts correctly.
TestResult CompareHitRates(std::span<const int> hits_a, std::span<const int> hits_b);

// Mean log-score differential over its standard error, against a standard
// normal. Zero variance with a nonzero mean sets degenerate_variance and
// p = 0.
TestResult CompareLogScores(std::span<const double> log_a, std::span<const double> log_b);

struct RecoveryError {
  double rmse = 0.0;
  double mae = 0.0;
};

RecoveryError RecoveryErrors(std::span<const double> estimates, std::span<const double> truth);

struct MetricReport {
  std::string model;
  std::string sample;  // "in" or "out"
  double hit_rate = 0.0;
  double log_score = 0.0;
};

Vector PosteriorMeanBeta(const PosteriorDraws& draws);
Matrix PosteriorMeanSigma(const PosteriorDraws& draws);
// Posterior mean of the correlation matrix implied by each draw.
Matrix PosteriorMeanCorrelation(const PosteriorDraws& draws);

// Lower-triangle off-diagonal entries, row by row.
std::vector<double> OffDiagonal(const Matrix& m);

}  // namespace mnpfs

#endif  // MNPFS_EVALUATION_HPP_
