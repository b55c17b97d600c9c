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

#include "mnpfs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mnpfs/error.hpp"
#include "mnpfs/normal.hpp"
#include "mnpfs/parallel.hpp"
#include "mnpfs/random.hpp"

namespace mnpfs {

Vector SmoothedFrequencies(std::span<const std::size_t> counts, std::size_t total) {
  Require(total > 0, "no simulated choices");
  const double n = static_cast<double>(total);
  const double alpha = 1.0 / n;
  const double norm = 1.0 + alpha * static_cast<double>(counts.size());
  Vector p(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t c = 0; c < counts.size(); ++c) {
    p(static_cast<Eigen::Index>(c)) = (static_cast<double>(counts[c]) / n + alpha) / norm;
  }
  return p;
}

PredictivePmf SimulatePmf(const ChoiceDataset& data, const Matrix& betas, const std::vector<Matrix>& sigma_factors,
                          std::size_t R, std::uint64_t seed, std::size_t threads) {
  data.Validate();
  Require(R >= 1, "at least one utility replicate per draw is required");
  Require(betas.rows() > 0, "no posterior draws");
  if (betas.cols() != static_cast<Eigen::Index>(data.K())) {
    Fail(ErrorCode::kMismatch, "draws have " + std::to_string(betas.cols()) + " coefficients but the design has " +
                                   std::to_string(data.K()));
  }
  const bool identity = sigma_factors.empty();
  Require(identity || sigma_factors.size() == static_cast<std::size_t>(betas.rows()),
          "one covariance factor per draw is required");
  const auto J = static_cast<Eigen::Index>(data.J());
  const std::size_t M = static_cast<std::size_t>(betas.rows());
  const std::size_t categories = data.num_alternatives;

  PredictivePmf pmf;
  pmf.samples = M * R;
  pmf.probs.resize(static_cast<Eigen::Index>(data.N()), static_cast<Eigen::Index>(categories));
  ParallelFor(data.N(), threads, [&](std::size_t i) {
    Rng rng = MakeRng(seed, i);
    const Matrix X = BuildDesignRow(data, i);
    std::vector<std::size_t> counts(categories, 0);
    Vector mean(J), e(J), z(J);
    for (std::size_t m = 0; m < M; ++m) {
      mean.noalias() = X * betas.row(static_cast<Eigen::Index>(m)).transpose();
      for (std::size_t r = 0; r < R; ++r) {
        for (Eigen::Index j = 0; j < J; ++j) e(j) = StandardNormal(rng);
        if (identity) {
          z = mean + e;
        } else {
          z.noalias() = mean + sigma_factors[m].triangularView<Eigen::Lower>() * e;
        }
        ++counts[static_cast<std::size_t>(ChoiceFromUtilities({z.data(), static_cast<std::size_t>(J)}))];
      }
    }
    pmf.probs.row(static_cast<Eigen::Index>(i)) = SmoothedFrequencies(counts, M * R).transpose();
  });
  return pmf;
}

PredictivePmf PredictivePmfFromDraws(const ChoiceDataset& data, const PosteriorDraws& draws, std::size_t R,
                                     std::uint64_t seed, std::size_t threads, std::size_t max_draws) {
  Require(draws.count() > 0, "no posterior draws");
  if (draws.J != data.J()) {
    Fail(ErrorCode::kMismatch, "draws are for J=" + std::to_string(draws.J) + " but the data has J=" +
                                   std::to_string(data.J()));
  }
  std::vector<std::size_t> used;
  const std::size_t total = draws.count();
  const std::size_t take = (max_draws == 0 || max_draws >= total) ? total : max_draws;
  for (std::size_t k = 0; k < take; ++k) used.push_back(k * total / take);

  Matrix betas(static_cast<Eigen::Index>(take), draws.beta.cols());
  std::vector<Matrix> factors;
  for (std::size_t k = 0; k < take; ++k) {
    betas.row(static_cast<Eigen::Index>(k)) = draws.beta.row(static_cast<Eigen::Index>(used[k]));
    if (draws.variant == ModelVariant::kFactor) {
      const Eigen::LLT<Matrix> llt(draws.Sigma(used[k]));
      if (llt.info() != Eigen::Success) Fail(ErrorCode::kNumerical, "draw " + std::to_string(used[k]) + " has a singular Sigma");
      factors.push_back(llt.matrixL());
    }
  }
  return SimulatePmf(data, betas, factors, R, seed, threads);
}

PredictivePmf NaiveForecast(std::span<const int> train_choices, std::size_t num_categories, std::size_t rows) {
  Require(!train_choices.empty(), "naive forecast needs training choices");
  std::vector<std::size_t> counts(num_categories, 0);
  for (int y : train_choices) {
    Require(y >= 0 && static_cast<std::size_t>(y) < num_categories, "training choice out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  const Vector p = SmoothedFrequencies(counts, train_choices.size());
  PredictivePmf pmf;
  pmf.samples = train_choices.size();
  pmf.probs = p.transpose().replicate(static_cast<Eigen::Index>(rows), 1);
  return pmf;
}

std::vector<int> PmfModes(const PredictivePmf& pmf) {
  std::vector<int> modes(pmf.N());
  for (std::size_t i = 0; i < pmf.N(); ++i) {
    Eigen::Index best = 0;
    pmf.probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);  // first maximum
    modes[i] = static_cast<int>(best);
  }
  return modes;
}

namespace {

void RequireAligned(const PredictivePmf& pmf, std::span<const int> truths) {
  if (pmf.N() != truths.size()) {
    Fail(ErrorCode::kMismatch, "pmf has " + std::to_string(pmf.N()) + " rows but there are " +
                                   std::to_string(truths.size()) + " observations");
  }
  for (int y : truths) Require(y >= 0 && static_cast<std::size_t>(y) < pmf.categories(), "observed category out of range");
}

}  // namespace

std::vector<int> HitIndicators(const PredictivePmf& pmf, std::span<const int> truths) {
  RequireAligned(pmf, truths);
  const std::vector<int> modes = PmfModes(pmf);
  std::vector<int> hits(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) hits[i] = modes[i] == truths[i] ? 1 : 0;
  return hits;
}

double HitRate(const PredictivePmf& pmf, std::span<const int> truths) {
  const std::vector<int> hits = HitIndicators(pmf, truths);
  Require(!hits.empty(), "no observations");
  double sum = 0.0;
  for (int h : hits) sum += h;
  return sum / static_cast<double>(hits.size());
}

std::vector<double> LogProbabilities(const PredictivePmf& pmf, std::span<const int> truths) {
  RequireAligned(pmf, truths);
  std::vector<double> out(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double p = pmf.probs(static_cast<Eigen::Index>(i), truths[i]);
    if (!(p > 0.0)) Fail(ErrorCode::kNumerical, "zero predicted probability for observation " + std::to_string(i));
    out[i] = std::log(p);
  }
  return out;
}

double LogScore(const PredictivePmf& pmf, std::span<const int> truths) {
  const std::vector<double> logs = LogProbabilities(pmf, truths);
  Require(!logs.empty(), "no observations");
  double sum = 0.0;
  for (double v : logs) sum += v;
  return sum / static_cast<double>(logs.size());
}

namespace {

double TwoSidedP(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

}  // namespace

TestResult CompareHitRates(std::span<const int> hits_a, std::span<const int> hits_b) {
  Require(!hits_a.empty(), "hit-rate comparison needs observations");
  Require(hits_a.size() == hits_b.size(), "hit vectors must be paired");
  double b = 0.0, c = 0.0;
  for (std::size_t i = 0; i < hits_a.size(); ++i) {
    if (hits_a[i] && !hits_b[i]) b += 1.0;
    if (!hits_a[i] && hits_b[i]) c += 1.0;
  }
  TestResult result;
  if (b + c == 0.0) return result;
  result.statistic = (b - c) / std::sqrt(b + c);
  result.p_value = TwoSidedP(result.statistic);
  return result;
}

TestResult CompareLogScores(std::span<const double> log_a, std::span<const double> log_b) {
  Require(!log_a.empty(), "log-score comparison needs observations");
  Require(log_a.size() == log_b.size(), "log-probability vectors must be paired");
  const double n = static_cast<double>(log_a.size());
  double mean = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < log_a.size(); ++i) {
    mean += log_a[i] - log_b[i];
    scale = std::max(scale, std::fabs(log_a[i] - log_b[i]));
  }
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < log_a.size(); ++i) {
    const double d = log_a[i] - log_b[i] - mean;
    ss += d * d;
  }
  TestResult result;
  const double sd = log_a.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  // Rounding in the mean leaves a spread of a few ulps when every
  // differential is equal; that counts as zero variance.
  const double tiny = 1e-12 * scale;
  if (!(sd > tiny)) {
    if (std::fabs(mean) > tiny) {
      result.degenerate_variance = true;
      result.statistic = std::copysign(std::numeric_limits<double>::infinity(), mean);
      result.p_value = 0.0;
    }
    return result;
  }
  result.statistic = mean / (sd / std::sqrt(n));
  result.p_value = TwoSidedP(result.statistic);
  return result;
}

RecoveryError RecoveryErrors(std::span<const double> estimates, std::span<const double> truth) {
  if (estimates.size() != truth.size()) {
    Fail(ErrorCode::kMismatch, "estimate and truth vectors differ in length");
  }
  Require(!truth.empty(), "no parameters to compare");
  double sq = 0.0, abs = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = estimates[i] - truth[i];
    sq += d * d;
    abs += std::fabs(d);
  }
  const double n = static_cast<double>(truth.size());
  return {std::sqrt(sq / n), abs / n};
}

Vector PosteriorMeanBeta(const PosteriorDraws& draws) {
  Require(draws.count() > 0, "no posterior draws");
  return draws.beta.colwise().mean().transpose();
}

Matrix PosteriorMeanSigma(const PosteriorDraws& draws) {
  Require(draws.count() > 0, "no posterior draws");
  const auto J = static_cast<Eigen::Index>(draws.J);
  Matrix sum = Matrix::Zero(J, J);
  for (std::size_t m = 0; m < draws.count(); ++m) sum += draws.Sigma(m);
  return sum / static_cast<double>(draws.count());
}

Matrix PosteriorMeanCorrelation(const PosteriorDraws& draws) {
  Require(draws.count() > 0, "no posterior draws");
  const auto J = static_cast<Eigen::Index>(draws.J);
  Matrix sum = Matrix::Zero(J, J);
  for (std::size_t m = 0; m < draws.count(); ++m) sum += CorrelationFromCovariance(draws.Sigma(m));
  return sum / static_cast<double>(draws.count());
}

std::vector<double> OffDiagonal(const Matrix& m) {
  std::vector<double> out;
  for (Eigen::Index r = 1; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < r; ++c) out.push_back(m(r, c));
  }
  return out;
}

}  // namespace mnpfs
