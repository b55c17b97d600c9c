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


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "fixtures.hpp"
#include "mnpfs/error.hpp"
#include "mnpfs/evaluation.hpp"
#include "mnpfs/spherical.hpp"

using namespace mnpfs;

namespace {

PredictivePmf FromRows(std::vector<std::vector<double>> rows) {
  PredictivePmf p;
  p.probs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c) p.probs(i, c) = rows[i][c];
  p.samples = 1;
  return p;
}

PredictivePmf Uniform(std::size_t N, std::size_t categories) {
  PredictivePmf p;
  p.probs = Matrix::Constant(N, categories, 1.0 / static_cast<double>(categories));
  return p;
}

}  // namespace

TEST_CASE("hit rate") {
  const auto p = FromRows({{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.2, 0.2, 0.6}, {0.5, 0.4, 0.1}});
  CHECK(HitRate(p, std::vector<int>{0, 1, 2, 0}) == 1.0);
  CHECK(HitRate(p, std::vector<int>{0, 1, 2, 1}) == 0.75);
  CHECK(HitRate(Uniform(5, 4), std::vector<int>{0, 0, 0, 0, 0}) == 1.0);
  CHECK(HitRate(Uniform(5, 4), std::vector<int>{1, 2, 3, 1, 2}) == 0.0);
  CHECK(PmfModes(FromRows({{0.4, 0.4, 0.2}})) == std::vector<int>{0});
  CHECK(HitIndicators(p, std::vector<int>{0, 2, 2, 0}) == std::vector<int>{1, 0, 1, 1});
  CHECK_THROWS_AS(HitRate(p, std::vector<int>{0, 1}), Error);
}

TEST_CASE("log score") {
  std::vector<int> truths(50);
  std::iota(truths.begin(), truths.end(), 0);
  CHECK(std::fabs(LogScore(Uniform(50, 50), truths) + std::log(50.0)) < 1e-12);
  CHECK(LogScore(Uniform(50, 50), truths) == doctest::Approx(-3.912).epsilon(1e-4));

  // One-hot frequencies after smoothing with M R = 1e5 against imperfect pmfs.
  std::vector<std::size_t> counts(50, 0);
  counts[7] = 100000;
  const Vector sharp = SmoothedFrequencies(counts, 100000);
  PredictivePmf perfect;
  perfect.probs = sharp.transpose().replicate(3, 1);
  const std::vector<int> sevens = {7, 7, 7};
  const double best = LogScore(perfect, sevens);
  CHECK(best < 0.0);
  CHECK(best > -1e-3);
  CHECK(best == doctest::Approx(std::log((1.0 + 1e-5) / (1.0 + 50e-5))).epsilon(1e-12));
  std::mt19937_64 rng(4);
  std::gamma_distribution<double> g(1.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    PredictivePmf other;
    other.probs.resize(3, 50);
    for (Eigen::Index i = 0; i < other.probs.size(); ++i) other.probs.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < 3; ++i) other.probs.row(i) /= other.probs.row(i).sum();
    CHECK(best > LogScore(other, sevens));
  }
  PredictivePmf zero = FromRows({{1.0, 0.0}});
  CHECK_THROWS_AS(LogScore(zero, std::vector<int>{1}), Error);
}

TEST_CASE("the true pmf maximizes the expected log score") {
  // Three binary observations: every outcome pattern enumerated with its
  // probability under the true pmf.
  const std::vector<double> p1 = {0.2, 0.55, 0.9};
  auto expected_score = [&](const std::vector<double>& q) {
    PredictivePmf pmf;
    pmf.probs.resize(3, 2);
    for (int i = 0; i < 3; ++i) pmf.probs.row(i) << 1.0 - q[i], q[i];
    double e = 0.0;
    for (int pattern = 0; pattern < 8; ++pattern) {
      std::vector<int> y(3);
      double w = 1.0;
      for (int i = 0; i < 3; ++i) {
        y[i] = (pattern >> i) & 1;
        w *= y[i] ? p1[i] : 1.0 - p1[i];
      }
      e += w * LogScore(pmf, y);
    }
    return e;
  };
  const double truth = expected_score(p1);
  for (double a = 0.05; a < 1.0; a += 0.05) {
    for (double b = 0.05; b < 1.0; b += 0.05) {
      for (double c = 0.05; c < 1.0; c += 0.05) CHECK(truth >= expected_score({a, b, c}) - 1e-15);
    }
  }
}

TEST_CASE("metrics are permutation invariant") {
  std::mt19937_64 rng(5);
  std::gamma_distribution<double> g(1.0, 1.0);
  PredictivePmf p;
  p.probs.resize(40, 4);
  for (Eigen::Index i = 0; i < p.probs.size(); ++i) p.probs.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < 40; ++i) p.probs.row(i) /= p.probs.row(i).sum();
  std::vector<int> y(40);
  for (auto& v : y) v = static_cast<int>(rng() % 4);
  std::vector<int> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  PredictivePmf q = p;
  std::vector<int> z(40);
  for (int i = 0; i < 40; ++i) q.probs.row(i) = p.probs.row(order[i]), z[i] = y[order[i]];
  CHECK(HitRate(q, z) == HitRate(p, y));
  CHECK(LogScore(q, z) == doctest::Approx(LogScore(p, y)).epsilon(1e-14));
}

TEST_CASE("naive forecast") {
  const std::vector<int> train = {0, 0, 1, 1};
  const auto p = NaiveForecast(train, 2, 3);
  CHECK(p.N() == 3);
  CHECK(p.probs(0, 0) == doctest::Approx(0.5));
  CHECK(p.probs(2, 1) == doctest::Approx(0.5));

  const auto single = NaiveForecast(std::vector<int>{2, 2, 2}, 4, 2);
  CHECK(PmfModes(single) == std::vector<int>{2, 2});
  CHECK(single.probs.minCoeff() > 0.0);
  CHECK(single.probs.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<int> own = {1, 2, 2, 0, 2, 1, 2};
  CHECK(HitRate(NaiveForecast(own, 3, own.size()), own) == doctest::Approx(4.0 / 7.0));
  CHECK_THROWS_AS(NaiveForecast(std::vector<int>{}, 3, 1), Error);
}

TEST_CASE("smoothed frequencies") {
  const std::vector<std::size_t> one_hot = {0, 1, 0};
  const Vector p = SmoothedFrequencies(one_hot, 1);
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(0.5));
  CHECK(p(0) == doctest::Approx(0.25));
}

TEST_CASE("single draw and replicate give a smoothed one-hot pmf") {
  const auto d = fixtures::Simulate({.alternatives = 3, .N = 20}, Vector::Zero(3), Matrix::Identity(2, 2));
  Matrix beta = Matrix::Zero(1, 3);
  const auto p = SimulatePmf(d, beta, {}, 1, 3, 1);
  CHECK(p.samples == 1);
  for (std::size_t i = 0; i < p.N(); ++i) {
    CHECK(p.probs.row(i).maxCoeff() == doctest::Approx(0.5));
    CHECK(p.probs.row(i).minCoeff() == doctest::Approx(0.25));
    CHECK(std::fabs(p.probs.row(i).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("exchangeable utilities give a uniform pmf") {
  // Sigma = (I + 11')/2 is the differenced covariance of iid utilities.
  const std::size_t J = 4;
  const auto d = fixtures::Simulate({.alternatives = J + 1, .N = 5}, Vector::Zero(J + 1), Matrix::Identity(J, J));
  const Matrix sigma = 0.5 * (Matrix::Identity(J, J) + Matrix::Ones(J, J));
  const Matrix L = sigma.llt().matrixL();
  const Matrix betas = Matrix::Zero(200, J + 1);
  const std::vector<Matrix> factors(200, L);
  const auto p = SimulatePmf(d, betas, factors, 250, 4, 1);
  CHECK(p.samples == 50000);
  const double sd = std::sqrt(0.2 * 0.8 / 50000);
  for (Eigen::Index i = 0; i < p.probs.size(); ++i) CHECK(std::fabs(p.probs.data()[i] - 0.2) < 5 * sd);
}

TEST_CASE("binary pmf matches the closed-form probit probability") {
  Vector truth(2);
  truth << 0.2, -0.8;
  const auto d = fixtures::Simulate({.alternatives = 2, .N = 10, .seed = 6}, truth, Matrix::Identity(1, 1));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  Matrix betas(400, 2);
  for (Eigen::Index m = 0; m < 400; ++m) betas.row(m) << 0.2 + 0.3 * n(rng), -0.8 + 0.2 * n(rng);
  const auto p = SimulatePmf(d, betas, {}, 100, 8, 1);
  const boost::math::normal_distribution<double> n01;
  for (std::size_t i = 0; i < d.N(); ++i) {
    const double dx = d.alt_covariates(2 * i + 1, 0) - d.alt_covariates(2 * i, 0);
    double expected = 0.0;
    for (Eigen::Index m = 0; m < 400; ++m) expected += boost::math::cdf(n01, betas(m, 0) + betas(m, 1) * dx);
    expected /= 400;
    CHECK(std::fabs(p.probs(i, 1) - expected) < 5 * std::sqrt(0.25 / 40000) + 1.0 / 40000);
  }
}

TEST_CASE("pmf does not depend on the thread count") {
  const auto d = fixtures::Simulate({.alternatives = 4, .N = 37}, Vector::Zero(4), Matrix::Identity(3, 3));
  Matrix betas = Matrix::Constant(30, 4, 0.1);
  const auto a = SimulatePmf(d, betas, {}, 3, 9, 1);
  const auto b = SimulatePmf(d, betas, {}, 3, 9, 4);
  CHECK(a.probs == b.probs);
  CHECK_THROWS_AS(SimulatePmf(d, Matrix::Zero(3, 5), {}, 1, 1, 1), Error);
  CHECK_THROWS_AS(SimulatePmf(d, betas, {}, 0, 1, 1), Error);
}

TEST_CASE("pmf from posterior draws thins evenly") {
  const auto d = fixtures::Simulate({.alternatives = 3, .N = 8}, Vector::Zero(3), Matrix::Identity(2, 2));
  PosteriorDraws draws;
  draws.variant = ModelVariant::kIdentity;
  draws.J = 2;
  draws.beta = Matrix::Zero(100, 3);
  const auto all = PredictivePmfFromDraws(d, draws, 2, 1, 1);
  CHECK(all.samples == 200);
  const auto some = PredictivePmfFromDraws(d, draws, 2, 1, 1, 10);
  CHECK(some.samples == 20);
  draws.J = 3;
  CHECK_THROWS_AS(PredictivePmfFromDraws(d, draws, 2, 1, 1), Error);
}

TEST_CASE("paired hit-rate test") {
  const std::vector<int> a = {1, 0, 1, 1, 0, 1};
  const auto same = CompareHitRates(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);

  const std::vector<int> ones(100, 1), zeros(100, 0);
  const auto extreme = CompareHitRates(ones, zeros);
  CHECK(extreme.p_value < 0.001);
  CHECK(extreme.statistic > 0.0);

  // Direct recomputation from the paired differences d_i = a_i - b_i:
  // z = sum(d) / sqrt(sum(d^2)).
  std::mt19937_64 rng(10);
  std::vector<int> x(300), y(300);
  for (int i = 0; i < 300; ++i) x[i] = rng() % 10 < 6, y[i] = rng() % 10 < 5;
  double sd = 0.0, sd2 = 0.0;
  for (int i = 0; i < 300; ++i) sd += x[i] - y[i], sd2 += (x[i] - y[i]) * (x[i] - y[i]);
  const double z = sd / std::sqrt(sd2);
  const auto r = CompareHitRates(x, y);
  CHECK(r.statistic == doctest::Approx(z).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(std::erfc(std::fabs(z) / std::sqrt(2.0))).epsilon(1e-12));
  CHECK_THROWS_AS(CompareHitRates(std::vector<int>{}, std::vector<int>{}), Error);
  CHECK_THROWS_AS(CompareHitRates(a, std::vector<int>{1}), Error);
}

TEST_CASE("log-score differential test") {
  const std::vector<double> a = {-1.0, -0.5, -2.0, -0.1};
  const auto same = CompareLogScores(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);
  CHECK_FALSE(same.degenerate_variance);

  std::vector<double> b(100), c(100);
  for (int i = 0; i < 100; ++i) b[i] = -0.3 * (i % 7) - 0.01 * i, c[i] = b[i] - 0.1;
  const auto flat = CompareLogScores(b, c);
  CHECK(flat.degenerate_variance);
  CHECK(flat.p_value == 0.0);
  CHECK(flat.statistic > 0.0);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  std::vector<double> x(250), y(250), dlt(250);
  for (int i = 0; i < 250; ++i) {
    x[i] = -1.0 + 0.3 * n(rng);
    y[i] = -1.05 + 0.3 * n(rng);
    dlt[i] = x[i] - y[i];
  }
  const double mean = std::accumulate(dlt.begin(), dlt.end(), 0.0) / 250;
  double ss = 0.0;
  for (double v : dlt) ss += (v - mean) * (v - mean);
  const double t = mean / std::sqrt(ss / 249 / 250);
  const auto r = CompareLogScores(x, y);
  CHECK(r.statistic == doctest::Approx(t).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(std::erfc(std::fabs(t) / std::sqrt(2.0))).epsilon(1e-12));
  CHECK_FALSE(r.degenerate_variance);
}

TEST_CASE("recovery errors") {
  const std::vector<double> t = {0.5, -1.0, 2.0};
  CHECK(RecoveryErrors(t, t).rmse == 0.0);
  CHECK(RecoveryErrors(t, t).mae == 0.0);
  const std::vector<double> plus = {1.5, 0.0, 3.0};
  CHECK(RecoveryErrors(plus, t).rmse == doctest::Approx(1.0));
  CHECK(RecoveryErrors(plus, t).mae == doctest::Approx(1.0));
  const auto e = RecoveryErrors(std::vector<double>{1, 2}, std::vector<double>{0, 0});
  CHECK(e.rmse == doctest::Approx(std::sqrt(2.5)));
  CHECK(e.mae == doctest::Approx(1.5));
  CHECK_THROWS_AS(RecoveryErrors(t, std::vector<double>{1.0}), Error);
}

TEST_CASE("posterior summaries") {
  PosteriorDraws draws;
  draws.variant = ModelVariant::kFactor;
  draws.J = 2;
  draws.q = 1;
  draws.beta.resize(2, 2);
  draws.beta << 1.0, 2.0, 3.0, 4.0;
  draws.kappa.resize(2, 3);
  draws.kappa << 1.0, 1.2, 0.5, 2.0, 0.3, 4.0;
  CHECK(PosteriorMeanBeta(draws).isApprox(Vector::LinSpaced(2, 2.0, 3.0)));
  const Matrix s0 = CovarianceFromAngles(AngleVector{draws.kappa.row(0).transpose()}, 2, 1);
  const Matrix s1 = CovarianceFromAngles(AngleVector{draws.kappa.row(1).transpose()}, 2, 1);
  CHECK(PosteriorMeanSigma(draws).isApprox(0.5 * (s0 + s1)));
  const Matrix r = 0.5 * (CorrelationFromCovariance(s0) + CorrelationFromCovariance(s1));
  CHECK(PosteriorMeanCorrelation(draws).isApprox(r));

  Matrix m(3, 3);
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  CHECK(OffDiagonal(m) == std::vector<double>{4, 7, 8});
}
