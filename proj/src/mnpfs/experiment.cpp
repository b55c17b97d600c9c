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

#include "mnpfs/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "mnpfs/error.hpp"
#include "mnpfs/random.hpp"
#include "mnpfs/spherical.hpp"

namespace mnpfs {

void DgpConfig::Validate() const {
  Require(num_alternatives >= 2, "at least two alternatives are required");
  Require(N > 0, "the number of observations must be positive");
  Require(intercept_variance >= 0.0, "intercept variance must be non-negative");
  const double floor = num_alternatives > 2 ? -1.0 / static_cast<double>(num_alternatives - 2) : -1.0;
  Require(iw_off_diagonal > floor && iw_off_diagonal < 1.0,
          "Inverse-Wishart scale off-diagonal must give a positive definite matrix");
  if (sigma) {
    const auto J = static_cast<Eigen::Index>(num_alternatives - 1);
    Require(sigma->rows() == J && sigma->cols() == J, "fixed Sigma must be J x J");
  }
}

Matrix SampleInverseWishart(double df, const Matrix& scale, Rng& rng) {
  const Eigen::Index p = scale.rows();
  Require(scale.cols() == p, "scale matrix must be square");
  Require(df > static_cast<double>(p) - 1.0, "Inverse-Wishart degrees of freedom too small");
  const Eigen::LLT<Matrix> scale_llt(scale);
  if (scale_llt.info() != Eigen::Success) Fail(ErrorCode::kNumerical, "scale matrix is not positive definite");
  // W = L A A' L' ~ Wishart(df, scale^{-1}) with L L' = scale^{-1}.
  const Matrix inv = scale_llt.solve(Matrix::Identity(p, p));
  const Matrix L = Eigen::LLT<Matrix>(inv).matrixL();
  Matrix A = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    std::gamma_distribution<double> gamma(0.5 * (df - static_cast<double>(i)), 2.0);
    A(i, i) = std::sqrt(gamma(rng));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = StandardNormal(rng);
  }
  const Matrix LA = L * A;
  const Matrix W = LA * LA.transpose();
  return W.llt().solve(Matrix::Identity(p, p));
}

SimulatedData SimulateDataset(const DgpConfig& config) {
  config.Validate();
  const std::size_t J = config.num_alternatives - 1;
  const auto Ji = static_cast<Eigen::Index>(J);
  Rng rng = MakeRng(config.seed, 0);

  SimulatedData out;
  if (config.sigma) {
    out.truth.sigma = *config.sigma;
  } else {
    Matrix V = Matrix::Constant(Ji, Ji, config.iw_off_diagonal);
    V.diagonal().setOnes();
    const Matrix S = SampleInverseWishart(static_cast<double>(J + 3), V, rng);
    out.truth.sigma = static_cast<double>(J) * S / S.trace();
  }
  const Eigen::LLT<Matrix> llt(out.truth.sigma);
  if (llt.info() != Eigen::Success) Fail(ErrorCode::kNumerical, "true Sigma is not positive definite");
  const Matrix L = llt.matrixL();

  out.truth.beta.resize(Ji + 1);
  const double intercept_sd = std::sqrt(config.intercept_variance);
  for (Eigen::Index j = 0; j < Ji; ++j) out.truth.beta(j) = intercept_sd * StandardNormal(rng);
  out.truth.beta(Ji) = config.price_coefficient;

  ChoiceDataset& data = out.data;
  data.num_alternatives = config.num_alternatives;
  data.include_intercept = true;
  data.alt_names = {"log_price"};
  data.indiv_covariates.resize(static_cast<Eigen::Index>(config.N), 0);
  data.alt_covariates.resize(static_cast<Eigen::Index>(config.N * config.num_alternatives), 1);
  data.choices.resize(config.N);
  data.obs_ids.resize(config.N);

  Rng obs_rng = MakeRng(config.seed, 1);
  Vector z(Ji), e(Ji);
  for (std::size_t i = 0; i < config.N; ++i) {
    data.obs_ids[i] = static_cast<long long>(i + 1);
    const auto first = static_cast<Eigen::Index>(i * config.num_alternatives);
    for (Eigen::Index a = 0; a <= Ji; ++a) data.alt_covariates(first + a, 0) = StandardNormal(obs_rng);
    for (Eigen::Index j = 0; j < Ji; ++j) e(j) = StandardNormal(obs_rng);
    const double base_price = data.alt_covariates(first, 0);
    for (Eigen::Index j = 0; j < Ji; ++j) {
      z(j) = out.truth.beta(j) + config.price_coefficient * (data.alt_covariates(first + j + 1, 0) - base_price);
    }
    z += L * e;
    data.choices[i] = ChoiceFromUtilities({z.data(), J});
  }
  return out;
}

Split TrainTestSplit(std::size_t N, double train_fraction, std::uint64_t seed) {
  Require(train_fraction > 0.0 && train_fraction <= 1.0, "train fraction must lie in (0, 1]");
  const auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(N) - 1e-9));
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = MakeRng(seed, 0);
  std::shuffle(order.begin(), order.end(), rng);
  Split split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(N - n_train));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(N - n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

MetricReport VariantResult::Report(const std::string& sample) const {
  const bool in = sample == "in";
  const auto& hits = in ? hits_in : hits_out;
  const auto& logs = in ? log_in : log_out;
  MetricReport report;
  report.model = name;
  report.sample = sample;
  report.hit_rate = hits.empty() ? 0.0 : std::accumulate(hits.begin(), hits.end(), 0.0) / static_cast<double>(hits.size());
  report.log_score = logs.empty() ? 0.0 : std::accumulate(logs.begin(), logs.end(), 0.0) / static_cast<double>(logs.size());
  return report;
}

VariantResult FitAndEvaluate(const std::string& variant, const ChoiceDataset& train, const ChoiceDataset& test,
                             const ScalingRecord& scaling, const SamplerConfig& sampler,
                             const CalibratedPrior* prior, const FitOptions& options) {
  VariantResult result;
  result.name = variant;
  const auto start = std::chrono::steady_clock::now();
  if (variant == kNaiveVariant) {
    result.pmf_in = NaiveForecast(train.choices, train.num_alternatives, train.N());
    result.pmf_out = NaiveForecast(train.choices, train.num_alternatives, test.N());
  } else {
    SamplerConfig config = sampler;
    config.variant = ParseVariant(variant);
    result.draws = RunChain(train, config, config.variant == ModelVariant::kFactor ? prior : nullptr);
    result.pmf_in = PredictivePmfFromDraws(train, *result.draws, options.replicates, options.pmf_seed, options.threads,
                                           options.pmf_max_draws);
    if (test.N() > 0) {
      result.pmf_out = PredictivePmfFromDraws(test, *result.draws, options.replicates, options.pmf_seed + 1,
                                              options.threads, options.pmf_max_draws);
    }
    result.beta_original_scale =
        UnstandardizeCoefficients(PosteriorMeanBeta(*result.draws), scaling, train.J(), train.include_intercept);
  }
  result.hits_in = HitIndicators(result.pmf_in, train.choices);
  result.log_in = LogProbabilities(result.pmf_in, train.choices);
  if (test.N() > 0) {
    result.hits_out = HitIndicators(result.pmf_out, test.choices);
    result.log_out = LogProbabilities(result.pmf_out, test.choices);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

const VariantResult* ExperimentResult::Find(const std::string& name) const {
  for (const auto& v : variants) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

namespace {

std::vector<double> ToStd(const Vector& v) { return {v.data(), v.data() + v.size()}; }

CalibratedPrior ObtainPrior(const std::filesystem::path& cache, const Hyperparameters& theta, std::size_t J,
                            const CalibrationOptions& options) {
  if (cache.empty()) return CalibratePrior(theta, J, options);
  return LoadOrCalibratePrior(cache, theta, J, options);
}

}  // namespace

ExperimentResult RunNumericalExperiment(const ExperimentConfig& config, const ProgressFn& progress) {
  auto note = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  Require(!config.variants.empty(), "no variants requested");
  for (const auto& v : config.variants) {
    if (v != kNaiveVariant) ParseVariant(v);
  }
  ExperimentResult result;
  result.simulated = SimulateDataset(config.dgp);
  const ChoiceDataset& data = result.simulated.data;
  result.split = TrainTestSplit(data.N(), config.train_fraction, config.split_seed);
  auto [train, scaling] = StandardizeCovariates(SubsetObservations(data, result.split.train));
  const ChoiceDataset test = ApplyScaling(SubsetObservations(data, result.split.test), scaling);
  result.scaling = scaling;

  const bool needs_prior = std::find(config.variants.begin(), config.variants.end(), "mnp-fs") != config.variants.end();
  if (needs_prior) {
    Hyperparameters theta = config.theta;
    theta.q = config.sampler.q;
    note("calibrating prior for J=" + std::to_string(data.J()));
    result.prior = ObtainPrior(config.prior_cache, theta, data.J(), config.calibration);
  }

  for (const auto& variant : config.variants) {
    note("fitting " + variant);
    SamplerConfig sampler = config.sampler;
    if (!config.draw_directory.empty()) sampler.stream_directory = config.draw_directory / variant;
    result.variants.push_back(FitAndEvaluate(variant, train, test, scaling, sampler,
                                             result.prior ? &*result.prior : nullptr, config.fit));
    result.metrics.push_back(result.variants.back().Report("in"));
    if (test.N() > 0) result.metrics.push_back(result.variants.back().Report("out"));
  }

  if (const VariantResult* fs = result.Find("mnp-fs"); fs != nullptr) {
    const Truth& truth = result.simulated.truth;
    result.has_recovery = true;
    result.true_coef = ToStd(truth.beta);
    result.est_coef = ToStd(fs->beta_original_scale);
    const Matrix sigma_mean = PosteriorMeanSigma(*fs->draws);
    result.true_var = ToStd(truth.sigma.diagonal());
    result.est_var = ToStd(sigma_mean.diagonal());
    result.true_corr = OffDiagonal(CorrelationFromCovariance(truth.sigma));
    result.est_corr = OffDiagonal(PosteriorMeanCorrelation(*fs->draws));
    result.coefficient_error = RecoveryErrors(result.est_coef, result.true_coef);
    result.variance_error = RecoveryErrors(result.est_var, result.true_var);
    result.correlation_error = RecoveryErrors(result.est_corr, result.true_corr);
  }
  return result;
}

namespace {

int InternalIndex(const ChoiceDataset& data, int label) {
  for (std::size_t k = 0; k < data.num_alternatives; ++k) {
    if (data.Label(static_cast<int>(k)) == label) return static_cast<int>(k);
  }
  Fail(ErrorCode::kInvalidArgument, "no alternative with label " + std::to_string(label));
}

// Per-alternative mean and standard deviation of one alternative covariate.
std::pair<Vector, Vector> AlternativeMoments(const ChoiceDataset& data, Eigen::Index column) {
  const auto A = static_cast<Eigen::Index>(data.num_alternatives);
  Vector mean = Vector::Zero(A), sd = Vector::Zero(A);
  const double n = static_cast<double>(data.N());
  for (std::size_t i = 0; i < data.N(); ++i) mean += data.AltBlock(i).col(column);
  mean /= n;
  for (std::size_t i = 0; i < data.N(); ++i) sd += (data.AltBlock(i).col(column) - mean).array().square().matrix();
  sd = (sd / std::max(1.0, n - 1.0)).cwiseSqrt();
  return {mean, sd};
}

}  // namespace

std::vector<double> ProbabilityCurve(const ChoiceDataset& original, const ChoiceDataset& fit_data,
                                     const ScalingRecord& scaling, const PosteriorDraws& draws, int category,
                                     std::span<const double> prices, const FitOptions& options) {
  Require(original.k_a() >= 1, "probability curves need an alternative-specific covariate");
  Require(!prices.empty(), "empty price grid");
  const auto A = static_cast<Eigen::Index>(original.num_alternatives);
  const auto G = static_cast<Eigen::Index>(prices.size());

  ChoiceDataset curve;
  curve.num_alternatives = original.num_alternatives;
  curve.include_intercept = original.include_intercept;
  curve.alt_labels = original.alt_labels;
  curve.alt_names = original.alt_names;
  curve.indiv_names = original.indiv_names;
  curve.choices.assign(prices.size(), 0);
  curve.alt_covariates.resize(G * A, original.alt_covariates.cols());
  RowMatrix block(A, original.alt_covariates.cols());
  block.setZero();
  for (std::size_t i = 0; i < original.N(); ++i) block += original.AltBlock(i);
  block /= static_cast<double>(original.N());
  const int k = InternalIndex(original, category);
  for (Eigen::Index g = 0; g < G; ++g) {
    curve.alt_covariates.middleRows(g * A, A) = block;
    curve.alt_covariates(g * A + k, 0) = prices[static_cast<std::size_t>(g)];
  }
  curve.indiv_covariates.resize(G, original.indiv_covariates.cols());
  if (original.k_d() > 0) {
    const Eigen::RowVectorXd indiv_mean = original.indiv_covariates.colwise().mean();
    for (Eigen::Index g = 0; g < G; ++g) curve.indiv_covariates.row(g) = indiv_mean;
  }

  ChoiceDataset relabeled = RelabelBaseCategory(curve, InternalIndex(curve, fit_data.base_category()));
  for (std::size_t a = 0; a < fit_data.num_alternatives; ++a) {
    if (relabeled.Label(static_cast<int>(a)) != fit_data.Label(static_cast<int>(a))) {
      Fail(ErrorCode::kMismatch, "category labels of the fitted data do not match the curve data");
    }
  }
  relabeled = ApplyScaling(relabeled, scaling);
  const PredictivePmf pmf =
      PredictivePmfFromDraws(relabeled, draws, options.replicates, options.pmf_seed, options.threads, options.pmf_max_draws);
  const Eigen::Index column = InternalIndex(relabeled, category);
  std::vector<double> out(prices.size());
  for (Eigen::Index g = 0; g < G; ++g) out[static_cast<std::size_t>(g)] = pmf.probs(g, column);
  return out;
}

SensitivityResult BaseSensitivityRun(const ChoiceDataset& data, const SensitivityConfig& config,
                                     const ProgressFn& progress) {
  auto note = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  data.Validate();
  Require(data.k_a() >= 1, "sensitivity runs need an alternative-specific covariate");
  Require(config.grid_points >= 1, "price grid needs at least one point");

  std::vector<std::size_t> counts(data.num_alternatives, 0);
  for (int y : data.choices) ++counts[static_cast<std::size_t>(y)];
  std::vector<int> by_popularity(data.num_alternatives);
  std::iota(by_popularity.begin(), by_popularity.end(), 0);
  std::stable_sort(by_popularity.begin(), by_popularity.end(),
                   [&](int a, int b) { return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)]; });
  const int most = by_popularity.front();
  const int least = by_popularity.back();

  SensitivityResult result;
  result.bases = config.bases;
  if (result.bases.empty()) {
    const int other = most != 0 ? most : by_popularity[1];
    result.bases = {data.Label(0), data.Label(other)};
  }
  result.categories = config.categories;
  if (result.categories.empty()) result.categories = {data.Label(least), data.Label(most)};
  for (int b : result.bases) InternalIndex(data, b);

  note("solving for the equicorrelated loading mean");
  result.mu_star = SolveEquicorrelatedMu(config.sigma_gamma, config.nu, config.q, config.solver_draws, config.solver_seed);

  struct PriorSpec {
    std::string name;
    Hyperparameters theta;
  };
  const std::vector<PriorSpec> priors = {
      {"identity", {0.0, config.sigma_gamma, config.nu, config.q}},
      {"equicorrelated", {result.mu_star, config.sigma_gamma, config.nu, config.q}},
  };
  std::vector<CalibratedPrior> calibrated;
  for (const auto& p : priors) {
    note("calibrating the " + p.name + " prior");
    calibrated.push_back(ObtainPrior(config.prior_cache, p.theta, data.J(), config.calibration));
  }

  const auto [alt_mean, alt_sd] = AlternativeMoments(data, 0);
  std::vector<std::vector<double>> grids;
  for (int c : result.categories) {
    const int k = InternalIndex(data, c);
    std::vector<double> grid(config.grid_points);
    const double centre = alt_mean(k);
    const double half = config.grid_span_sd * alt_sd(k);
    for (std::size_t g = 0; g < config.grid_points; ++g) {
      grid[g] = config.grid_points == 1
                    ? centre
                    : centre - half + 2.0 * half * static_cast<double>(g) / static_cast<double>(config.grid_points - 1);
    }
    grids.push_back(std::move(grid));
  }

  SamplerConfig sampler = config.sampler;
  sampler.variant = ModelVariant::kFactor;
  sampler.q = config.q;
  for (int base : result.bases) {
    const ChoiceDataset relabeled = RelabelBaseCategory(data, InternalIndex(data, base));
    const auto [fit_data, scaling] = StandardizeCovariates(relabeled);
    for (std::size_t p = 0; p < priors.size(); ++p) {
      note("fitting base " + std::to_string(base) + " with the " + priors[p].name + " prior");
      const PosteriorDraws draws = RunChain(fit_data, sampler, &calibrated[p]);
      for (std::size_t c = 0; c < result.categories.size(); ++c) {
        const std::vector<double> probs =
            ProbabilityCurve(data, fit_data, scaling, draws, result.categories[c], grids[c], config.fit);
        for (std::size_t g = 0; g < probs.size(); ++g) {
          result.curves.push_back({base, priors[p].name, result.categories[c], g, grids[c][g], probs[g]});
        }
      }
    }
  }

  if (result.bases.size() >= 2) {
    auto sup = [&](const std::string& prior) {
      double worst = 0.0;
      for (const auto& a : result.curves) {
        if (a.prior != prior || a.base != result.bases[0]) continue;
        for (const auto& b : result.curves) {
          if (b.prior == prior && b.base == result.bases[1] && b.category == a.category && b.grid_index == a.grid_index) {
            worst = std::max(worst, std::fabs(a.probability - b.probability));
          }
        }
      }
      return worst;
    };
    result.identity_sup_distance = sup("identity");
    result.equicorrelated_sup_distance = sup("equicorrelated");
  }
  return result;
}

}  // namespace mnpfs
