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
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "fixtures.hpp"
#include "mnpfs/choice_data.hpp"
#include "mnpfs/error.hpp"
#include "mnpfs/evaluation.hpp"
#include "mnpfs/sampler.hpp"

using namespace mnpfs;

namespace {

ChoiceDataset OneObservation(std::size_t alternatives, const std::vector<double>& alt,
                             const std::vector<double>& indiv, bool intercept = true) {
  ChoiceDataset d;
  d.num_alternatives = alternatives;
  d.include_intercept = intercept;
  d.choices = {0};
  const auto k_a = alt.size() / alternatives;
  d.alt_covariates.resize(static_cast<Eigen::Index>(alternatives), static_cast<Eigen::Index>(k_a));
  for (std::size_t r = 0; r < alternatives; ++r)
    for (std::size_t c = 0; c < k_a; ++c) d.alt_covariates(r, c) = alt[r * k_a + c];
  d.indiv_covariates.resize(indiv.empty() ? 0 : 1, static_cast<Eigen::Index>(indiv.size()));
  for (std::size_t c = 0; c < indiv.size(); ++c) d.indiv_covariates(0, c) = indiv[c];
  return d;
}

ChoiceDataset ThreeChoices() {
  ChoiceDataset d;
  d.num_alternatives = 3;
  d.choices = {0, 1, 2};
  d.alt_covariates.resize(9, 1);
  for (int r = 0; r < 9; ++r) d.alt_covariates(r, 0) = 10.0 * (r / 3) + (r % 3);
  d.indiv_covariates.resize(3, 1);
  d.indiv_covariates << 1.0, 2.0, 4.0;
  d.obs_ids = {11, 12, 13};
  return d;
}

}  // namespace

TEST_CASE("design row with one alternative covariate") {
  const auto d = OneObservation(3, {1, 2, 3}, {});
  const Matrix x = BuildDesignRow(d, 0);
  Matrix expected(2, 3);
  expected << 1, 0, 1, 0, 1, 2;
  CHECK(x.isApprox(expected));
  CHECK(d.K() == 3);
}

TEST_CASE("design row of the intercept-only binary model") {
  const auto d = OneObservation(2, {}, {});
  const Matrix x = BuildDesignRow(d, 0);
  REQUIRE(x.rows() == 1);
  REQUIRE(x.cols() == 1);
  CHECK(x(0, 0) == 1.0);
}

TEST_CASE("design row with an individual covariate") {
  const auto d = OneObservation(3, {}, {5});
  const Matrix x = BuildDesignRow(d, 0);
  Matrix expected(2, 4);
  expected << 1, 0, 5, 0, 0, 1, 0, 5;
  CHECK(x.isApprox(expected));
  CHECK(d.K() == 4);
}

TEST_CASE("coefficient count follows the block structure") {
  CHECK(NumCoefficients(4, 2, 3, true) == 4 * (1 + 3) + 2);
  CHECK(NumCoefficients(4, 2, 3, false) == 4 * 3 + 2);
  const auto d = fixtures::Simulate({.alternatives = 4, .N = 30, .k_a = 2, .k_d = 2},
                                    Vector::Zero(3 * 3 + 2), Matrix::Identity(3, 3));
  const RowMatrix all = BuildDesign(d);
  CHECK(all.rows() == 30 * 3);
  for (std::size_t i = 0; i < d.N(); ++i) CHECK(BuildDesignRow(d, i).cols() == 11);
}

TEST_CASE("design row rejects mismatched covariate storage") {
  auto d = OneObservation(3, {1, 2, 3}, {});
  d.alt_covariates.resize(2, 1);
  CHECK_THROWS_AS(BuildDesignRow(d, 0), Error);
  auto e = OneObservation(3, {1, 2, 3}, {});
  CHECK_THROWS_AS(BuildDesignRow(e, 1), Error);
}

TEST_CASE("choice rule") {
  CHECK(ChoiceFromUtilities(std::vector<double>{-1, -2}) == 0);
  CHECK(ChoiceFromUtilities(std::vector<double>{0.5, 2.0}) == 2);
  CHECK(ChoiceFromUtilities(std::vector<double>{3, -1, 3}) == 1);
}

TEST_CASE("choice rule is scale and location invariant") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> full(5);
    for (auto& v : full) v = normal(rng);
    const double c = std::exp(2.0 * normal(rng));
    const double shift = 10.0 * normal(rng);
    std::vector<double> z(4), zc(4), zs(4);
    for (int j = 0; j < 4; ++j) {
      z[j] = full[j + 1] - full[0];
      zc[j] = c * z[j];
      zs[j] = (full[j + 1] + shift) - (full[0] + shift);
    }
    const int y = ChoiceFromUtilities(z);
    CHECK(ChoiceFromUtilities(zc) == y);
    CHECK(ChoiceFromUtilities(zs) == y);
    const auto top = std::max_element(full.begin(), full.end()) - full.begin();
    CHECK(y == top);
  }
}

TEST_CASE("relabel to the current base is the identity") {
  const auto d = ThreeChoices();
  const auto r = RelabelBaseCategory(d, 0);
  CHECK(r.choices == d.choices);
  CHECK(r.alt_covariates == d.alt_covariates);
  CHECK(r.base_category() == 0);
}

TEST_CASE("relabel swaps the new base with category zero") {
  const auto d = ThreeChoices();
  const auto r = RelabelBaseCategory(d, 2);
  // The transposition 0 <-> 2 maps choices (0, 1, 2) to (2, 1, 0).
  CHECK(r.choices == std::vector<int>{2, 1, 0});
  CHECK(r.base_category() == 2);
  CHECK(r.Label(0) == 2);
  CHECK(r.Label(2) == 0);
  for (std::size_t i = 0; i < d.N(); ++i) {
    CHECK(r.AltBlock(i).row(0) == d.AltBlock(i).row(2));
    CHECK(r.AltBlock(i).row(2) == d.AltBlock(i).row(0));
    CHECK(r.AltBlock(i).row(1) == d.AltBlock(i).row(1));
    // The chosen alternative keeps its covariates.
    CHECK(r.AltBlock(i).row(r.choices[i]) == d.AltBlock(i).row(d.choices[i]));
  }
  CHECK(r.indiv_covariates == d.indiv_covariates);
}

TEST_CASE("relabel twice restores the dataset") {
  const auto d = fixtures::Simulate({.alternatives = 5, .N = 50, .k_a = 2}, Vector::Zero(6),
                                    Matrix::Identity(4, 4));
  for (int base = 0; base < 5; ++base) {
    const auto twice = RelabelBaseCategory(RelabelBaseCategory(d, base), base);
    CHECK(twice.choices == d.choices);
    CHECK(twice.alt_covariates == d.alt_covariates);
    CHECK(twice.base_category() == 0);
  }
}

TEST_CASE("relabel preserves the multiset of covariate rows") {
  const auto d = fixtures::Simulate({.alternatives = 4, .N = 20}, Vector::Zero(4), Matrix::Identity(3, 3));
  const auto r = RelabelBaseCategory(d, 3);
  std::vector<double> a(d.alt_covariates.data(), d.alt_covariates.data() + d.alt_covariates.size());
  std::vector<double> b(r.alt_covariates.data(), r.alt_covariates.data() + r.alt_covariates.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK_THROWS_AS(RelabelBaseCategory(d, 4), Error);
  CHECK_THROWS_AS(RelabelBaseCategory(d, -1), Error);
}

TEST_CASE("standardized column has unit variance") {
  ChoiceDataset d;
  d.num_alternatives = 2;
  d.choices = {0, 1, 1, 0, 1};
  d.alt_covariates.resize(10, 1);
  for (int r = 0; r < 10; ++r) d.alt_covariates(r, 0) = 2.0 * (r + 1);
  const auto [s, rec] = StandardizeCovariates(d);
  const auto col = s.alt_covariates.col(0);
  const double mean = col.mean();
  const double var = (col.array() - mean).square().sum() / 9.0;
  CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean == doctest::Approx(0.0).scale(1.0));
  CHECK(rec.alt_sd(0) > 0.0);
}

TEST_CASE("unit-variance column is unchanged up to centring") {
  ChoiceDataset d;
  d.num_alternatives = 2;
  d.choices = {0, 1};
  d.alt_covariates.resize(4, 1);
  d.alt_covariates << -1.5, -0.5, 0.5, 1.5;
  const double sd = std::sqrt(5.0 / 3.0);
  d.alt_covariates /= sd;
  const auto [s, rec] = StandardizeCovariates(d);
  CHECK((s.alt_covariates - d.alt_covariates).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(rec.alt_sd(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant covariate cannot be standardized") {
  ChoiceDataset d;
  d.num_alternatives = 2;
  d.choices = {0, 1};
  d.alt_covariates = RowMatrix::Constant(4, 1, 3.0);
  CHECK_THROWS_AS(StandardizeCovariates(d), Error);
}

TEST_CASE("unstandardized coefficients give the same utilities") {
  const auto d = fixtures::Simulate({.alternatives = 3, .N = 40, .k_a = 1, .k_d = 2, .alt_mean = 2,
                                     .alt_sd = 3, .indiv_mean = 1, .indiv_sd = 2},
                                    Vector::Zero(7), Matrix::Identity(2, 2));
  const auto [s, rec] = StandardizeCovariates(d);
  Vector beta(7);
  beta << 0.3, -0.2, 0.5, 0.1, -0.4, 0.7, -0.6;
  const Vector raw = UnstandardizeCoefficients(beta, rec, 2, true);
  for (std::size_t i = 0; i < d.N(); ++i) {
    const Vector a = BuildDesignRow(s, i) * beta;
    const Vector b = BuildDesignRow(d, i) * raw;
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("back-transformed fit on scaled covariates reproduces the unscaled fit") {
  Vector truth(5);
  truth << 0.4, -0.3, 0.5, -0.2, -0.25;
  const auto raw = fixtures::Simulate({.alternatives = 3, .N = 400, .k_a = 1, .k_d = 1, .alt_mean = 2,
                                       .alt_sd = 3, .indiv_mean = 1, .indiv_sd = 2, .seed = 9},
                                      truth, Matrix::Identity(2, 2));
  const auto [scaled, rec] = StandardizeCovariates(raw);
  SamplerConfig cfg;
  cfg.variant = ModelVariant::kIdentity;
  cfg.total_iterations = 4000;
  cfg.burn_in = 1000;
  cfg.beta_prior_variance = 100.0;  // negligible prior, so the two fits target the same posterior
  cfg.seed = 4;
  const auto fit_raw = RunChain(raw, cfg, nullptr);
  cfg.seed = 5;
  const auto fit_scaled = RunChain(scaled, cfg, nullptr);
  Matrix back(fit_scaled.beta.rows(), fit_scaled.beta.cols());
  for (Eigen::Index m = 0; m < back.rows(); ++m)
    back.row(m) = UnstandardizeCoefficients(fit_scaled.beta.row(m).transpose(), rec, 2, true).transpose();
  const auto p_raw = SimulatePmf(raw, fit_raw.beta, {}, 1, 21, 1);
  const auto p_back = SimulatePmf(raw, back, {}, 1, 22, 1);
  const Matrix diff = (p_raw.probs - p_back.probs).cwiseAbs();
  MESSAGE("mean |dp| = " << diff.mean() << ", max |dp| = " << diff.maxCoeff());
  // Each cell averages 3000 simulated choices, so a difference of two
  // cells has sd <= 0.013; the max runs over 1200 cells.
  CHECK(diff.mean() < 0.015);
  CHECK(diff.maxCoeff() < 0.07);
}

TEST_CASE("long-format CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "mnpfs_core_model_test";
  std::filesystem::create_directories(dir);
  auto d = ThreeChoices();
  d.alt_names = {"log_price"};
  d.indiv_names = {"income"};
  WriteChoiceCsv(d, dir / "data.csv", dir / "indiv.csv");
  const auto back = LoadChoiceCsv(dir / "data.csv", dir / "indiv.csv");
  CHECK(back.choices == d.choices);
  CHECK(back.alt_covariates == d.alt_covariates);
  CHECK(back.indiv_covariates == d.indiv_covariates);
  CHECK(back.obs_ids == d.obs_ids);
  CHECK(back.alt_names == d.alt_names);

  std::ofstream(dir / "two_chosen.csv") << "obs_id,alt_id,chosen,x\n1,0,1,0.5\n1,1,1,0.2\n";
  CHECK_THROWS_AS(LoadChoiceCsv(dir / "two_chosen.csv"), Error);
  std::ofstream(dir / "bad_alt.csv") << "obs_id,alt_id,chosen,x\n1,0,1,0.5\n1,3,0,0.2\n";
  CHECK_THROWS_AS(LoadChoiceCsv(dir / "bad_alt.csv"), Error);
  std::ofstream(dir / "wide.csv") << "obs_id,choice,x0,x1\n1,0,0.5,0.2\n";
  CHECK_THROWS_AS(LoadChoiceCsv(dir / "wide.csv"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataset validation names broken invariants") {
  auto d = ThreeChoices();
  CHECK_NOTHROW(d.Validate());
  d.choices[1] = 3;
  CHECK_THROWS_AS(d.Validate(), Error);
}
