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

#ifndef MNPFS_EXPERIMENT_HPP_
#define MNPFS_EXPERIMENT_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mnpfs/choice_data.hpp"
#include "mnpfs/evaluation.hpp"
#include "mnpfs/prior.hpp"
#include "mnpfs/sampler.hpp"

namespace mnpfs {

// Synthetic choice data: one alternative-specific covariate (a log price)
// with iid standard normal entries, intercepts ~ Normal(0, intercept
// variance), a common price coefficient, and
// Sigma_0 = J * S / trace(S) with S ~ Inverse-Wishart(J + 3, V), where V has
// unit diagonal and a common off-diagonal.
struct DgpConfig {
  std::size_t num_alternatives = 50;
  std::size_t N = 5000;
  double intercept_variance = std::sqrt(0.5);
  double price_coefficient = -0.7;
  double iw_off_diagonal = 0.5;
  std::uint64_t seed = 1;
  // Replaces the Inverse-Wishart draw when set (must be J x J).
  std::optional<Matrix> sigma;

  void Validate() const;
};

struct Truth {
  Vector beta;  // J intercepts, then the price coefficient
  Matrix sigma;
};

struct SimulatedData {
  ChoiceDataset data;
  Truth truth;
};

// Bartlett decomposition of the Wishart draw for the inverse.
Matrix SampleInverseWishart(double df, const Matrix& scale, Rng& rng);

SimulatedData SimulateDataset(const DgpConfig& config);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Uniform random split: floor((1 - train_fraction) * N) test rows, the
// rest for training. Both index lists are sorted.
Split TrainTestSplit(std::size_t N, double train_fraction, std::uint64_t seed);

inline constexpr const char* kNaiveVariant = "naive";

struct FitOptions {
  std::size_t replicates = 5;
  std::size_t pmf_max_draws = 0;
  std::uint64_t pmf_seed = 11;
  std::size_t threads = 1;
};

// One model evaluated on a shared split. Probabilities and per-observation
// scores use internal category indices.
struct VariantResult {
  std::string name;
  std::optional<PosteriorDraws> draws;
  PredictivePmf pmf_in, pmf_out;
  std::vector<int> hits_in, hits_out;
  std::vector<double> log_in, log_out;
  Vector beta_original_scale;  // empty for the naive forecast
  double seconds = 0.0;

  MetricReport Report(const std::string& sample) const;
};

// Fits `variant` ("mnp-fs", "mnp-i" or "naive") on standardized training
// data and scores it in and out of sample.
VariantResult FitAndEvaluate(const std::string& variant, const ChoiceDataset& train, const ChoiceDataset& test,
                             const ScalingRecord& scaling, const SamplerConfig& sampler,
                             const CalibratedPrior* prior, const FitOptions& options);

struct ExperimentConfig {
  DgpConfig dgp;
  SamplerConfig sampler;
  Hyperparameters theta;
  CalibrationOptions calibration;
  std::vector<std::string> variants = {"mnp-fs", "mnp-i", kNaiveVariant};
  double train_fraction = 0.8;
  std::uint64_t split_seed = 2;
  FitOptions fit;
  // Calibrated priors are cached here when set.
  std::filesystem::path prior_cache;
  // Draws of variant v are streamed to <draw_directory>/<v> when set.
  std::filesystem::path draw_directory;
};

struct ExperimentResult {
  SimulatedData simulated;
  Split split;
  ScalingRecord scaling;
  std::optional<CalibratedPrior> prior;
  std::vector<VariantResult> variants;
  std::vector<MetricReport> metrics;
  // Posterior means against the truth, for the factor model only.
  bool has_recovery = false;
  RecoveryError coefficient_error, variance_error, correlation_error;
  std::vector<double> true_coef, est_coef, true_var, est_var, true_corr, est_corr;

  const VariantResult* Find(const std::string& name) const;
};

using ProgressFn = std::function<void(const std::string&)>;

ExperimentResult RunNumericalExperiment(const ExperimentConfig& config, const ProgressFn& progress = {});

struct SensitivityConfig {
  SamplerConfig sampler;
  CalibrationOptions calibration;
  double sigma_gamma = 1.0;
  double nu = 5.0;
  std::size_t q = 1;
  std::size_t solver_draws = 100000;
  std::uint64_t solver_seed = 3;
  // Base categories to compare; empty uses the current base and the most
  // popular category.
  std::vector<int> bases;
  // Categories whose curves are drawn; empty uses the least and the most
  // popular category.
  std::vector<int> categories;
  std::size_t grid_points = 25;
  double grid_span_sd = 2.0;
  FitOptions fit;
  std::filesystem::path prior_cache;
};

struct CurvePoint {
  int base = 0;
  std::string prior;  // "identity" or "equicorrelated"
  int category = 0;
  std::size_t grid_index = 0;
  double price = 0.0;
  double probability = 0.0;
};

struct SensitivityResult {
  double mu_star = 0.0;
  std::vector<int> bases;
  std::vector<int> categories;
  std::vector<CurvePoint> curves;
  // Largest absolute curve difference between the first two bases.
  double identity_sup_distance = 0.0;
  double equicorrelated_sup_distance = 0.0;
};

// Purchase probability of `category` (an original label) as its price
// moves over `prices` while the other prices stay at their per-alternative
// means. `fit_data` is the relabeled, standardized data the draws came from.
std::vector<double> ProbabilityCurve(const ChoiceDataset& original, const ChoiceDataset& fit_data,
                                     const ScalingRecord& scaling, const PosteriorDraws& draws, int category,
                                     std::span<const double> prices, const FitOptions& options);

// Fits the factor model under the identity and the equicorrelated prior
// for every base and compares the resulting probability curves.
SensitivityResult BaseSensitivityRun(const ChoiceDataset& data, const SensitivityConfig& config,
                                     const ProgressFn& progress = {});

}  // namespace mnpfs

#endif  // MNPFS_EXPERIMENT_HPP_
