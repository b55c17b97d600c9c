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


// Exercises the library only through the C interface.

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "mnpfs/mnpfs.h"

namespace fs = std::filesystem;

namespace {

fs::path Scratch(const std::string& name) {
  const char* root = std::getenv("MNPFS_TEST_TMP");
  const fs::path dir = (root ? fs::path(root) : fs::temp_directory_path()) / ("capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Margin log density written out from the definition: the angle is warped
// to g = Phi^{-1}(kappa / B), standardized, and Yeo-Johnson transformed
// onto a standard normal.
double MarginLogDensity(double kappa, const mnpfs_margin& m) {
  const boost::math::normal n;
  const double g = boost::math::quantile(n, kappa / m.upper_bound);
  const double u = (g - m.mu) / m.tau;
  double x, log_jac;
  if (u >= 0.0) {
    x = m.eta == 0.0 ? std::log1p(u) : (std::pow(1.0 + u, m.eta) - 1.0) / m.eta;
    log_jac = (m.eta - 1.0) * std::log1p(u);
  } else {
    const double e = 2.0 - m.eta;
    x = e == 0.0 ? -std::log1p(-u) : -(std::pow(1.0 - u, e) - 1.0) / e;
    log_jac = (1.0 - m.eta) * std::log1p(-u);
  }
  const double log_phi_x = -0.5 * x * x - 0.5 * std::log(2.0 * M_PI);
  const double log_phi_g = -0.5 * g * g - 0.5 * std::log(2.0 * M_PI);
  return log_phi_x + log_jac - std::log(m.tau) - std::log(m.upper_bound) - log_phi_g;
}

mnpfs_sampler_options ShortSampler(size_t iterations, size_t burn_in) {
  mnpfs_sampler_options s;
  mnpfs_sampler_options_init(&s);
  s.total_iterations = iterations;
  s.burn_in = burn_in;
  s.seed = 3;
  return s;
}

}  // namespace

TEST_CASE("version and error state") {
  CHECK(std::string(mnpfs_version()).size() > 0);
  mnpfs_dataset* d = nullptr;
  CHECK(mnpfs_dataset_load("/nonexistent/file.csv", nullptr, 1, &d) == MNPFS_ERR_IO);
  CHECK(d == nullptr);
  CHECK(std::string(mnpfs_last_error()).find("file.csv") != std::string::npos);
  CHECK(mnpfs_dataset_load(nullptr, nullptr, 1, &d) == MNPFS_ERR_INVALID_ARGUMENT);
  CHECK(std::string(mnpfs_version()).size() > 0);
  mnpfs_calibrate_options c;
  mnpfs_calibrate_options_init(&c);
  CHECK(c.M == 100000);
  CHECK(c.q == 1);
  CHECK(c.nu == 5.0);
  double mu = 0.0;
  CHECK(mnpfs_solve_equicorrelated_mu(1.0, 5.0, 1, 2000, 1, &mu) == MNPFS_OK);
  CHECK(std::string(mnpfs_last_error()).empty());
}

TEST_CASE("null handles are rejected") {
  mnpfs_dataset_info info;
  CHECK(mnpfs_dataset_get_info(nullptr, &info) == MNPFS_ERR_INVALID_ARGUMENT);
  CHECK(mnpfs_prior_num_margins(nullptr) == 0);
  mnpfs_margin m;
  CHECK(mnpfs_prior_margin(nullptr, 0, &m) == MNPFS_ERR_INVALID_ARGUMENT);
  CHECK(mnpfs_prior_calibrate(nullptr, nullptr) == MNPFS_ERR_INVALID_ARGUMENT);
  CHECK(mnpfs_cmd_fit(nullptr, nullptr, nullptr, nullptr) == MNPFS_ERR_INVALID_ARGUMENT);
  mnpfs_dataset_free(nullptr);
  mnpfs_prior_free(nullptr);
  mnpfs_sampler_options_init(nullptr);
}

TEST_CASE("simulate, load and relabel a dataset") {
  const fs::path dir = Scratch("dataset");
  mnpfs_dgp_options dgp;
  mnpfs_dgp_options_init(&dgp);
  CHECK(dgp.num_alternatives == 10);
  CHECK(dgp.num_observations == 2000);
  CHECK(dgp.price_coefficient == -0.7);
  dgp.num_alternatives = 4;
  dgp.num_observations = 60;
  dgp.seed = 2;
  const std::string path = (dir / "d.csv").string();
  REQUIRE(mnpfs_cmd_simulate(&dgp, path.c_str(), nullptr) == MNPFS_OK);
  CHECK(fs::exists(dir / "d_truth_sigma.csv"));

  mnpfs_dataset* d = nullptr;
  REQUIRE(mnpfs_dataset_load(path.c_str(), nullptr, 1, &d) == MNPFS_OK);
  mnpfs_dataset_info info;
  REQUIRE(mnpfs_dataset_get_info(d, &info) == MNPFS_OK);
  CHECK(info.num_observations == 60);
  CHECK(info.num_alternatives == 4);
  CHECK(info.num_alt_covariates == 1);
  CHECK(info.num_indiv_covariates == 0);
  CHECK(info.num_coefficients == 4);
  CHECK(info.base_category == 0);

  std::vector<int> y(60);
  CHECK(mnpfs_dataset_choices(d, y.data(), 10) == MNPFS_ERR_INVALID_ARGUMENT);
  REQUIRE(mnpfs_dataset_choices(d, y.data(), y.size()) == MNPFS_OK);

  mnpfs_dataset* r = nullptr;
  REQUIRE(mnpfs_dataset_relabel(d, 2, &r) == MNPFS_OK);
  mnpfs_dataset_info rinfo;
  REQUIRE(mnpfs_dataset_get_info(r, &rinfo) == MNPFS_OK);
  CHECK(rinfo.base_category == 2);
  std::vector<int> yr(60);
  REQUIRE(mnpfs_dataset_choices(r, yr.data(), yr.size()) == MNPFS_OK);
  // Swapping categories 0 and 2 moves the base to the front.
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int expected = y[i] == 0 ? 2 : (y[i] == 2 ? 0 : y[i]);
    CHECK(yr[i] == expected);
  }
  CHECK(mnpfs_dataset_relabel(d, 7, &r) != MNPFS_OK);

  const std::string copy = (dir / "copy.csv").string();
  REQUIRE(mnpfs_dataset_save(d, copy.c_str()) == MNPFS_OK);
  CHECK(Slurp(copy) == Slurp(path));

  mnpfs_dataset_free(r);
  mnpfs_dataset_free(d);
}

TEST_CASE("prior calibration and density") {
  const fs::path dir = Scratch("prior");
  mnpfs_calibrate_options c;
  mnpfs_calibrate_options_init(&c);
  c.J = 3;
  c.M = 5000;
  c.seed = 4;
  mnpfs_prior* p = nullptr;
  REQUIRE(mnpfs_prior_calibrate(&c, &p) == MNPFS_OK);
  // n - 1 angles with n = J(q + 1) - q(q - 1)/2 = 6.
  REQUIRE(mnpfs_prior_num_margins(p) == 5);
  std::vector<mnpfs_margin> margins(5);
  for (size_t i = 0; i < 5; ++i) REQUIRE(mnpfs_prior_margin(p, i, &margins[i]) == MNPFS_OK);
  for (size_t i = 0; i < 4; ++i) CHECK(margins[i].upper_bound == doctest::Approx(M_PI).epsilon(1e-15));
  CHECK(margins[4].upper_bound == doctest::Approx(2.0 * M_PI).epsilon(1e-15));
  for (const auto& m : margins) {
    CHECK(m.tau > 0.0);
    CHECK(std::isfinite(m.avg_loglik));
  }
  mnpfs_margin out_of_range;
  CHECK(mnpfs_prior_margin(p, 5, &out_of_range) == MNPFS_ERR_INVALID_ARGUMENT);

  const std::vector<double> kappa = {0.4, 1.2, 2.0, 2.9, 4.5};
  double density = 0.0;
  REQUIRE(mnpfs_prior_log_density(p, kappa.data(), kappa.size(), &density) == MNPFS_OK);
  double expected = 0.0;
  for (size_t i = 0; i < 5; ++i) expected += MarginLogDensity(kappa[i], margins[i]);
  CHECK(density == doctest::Approx(expected).epsilon(1e-10));
  CHECK(mnpfs_prior_log_density(p, kappa.data(), 4, &density) != MNPFS_OK);

  const std::string path = (dir / "p.txt").string();
  REQUIRE(mnpfs_prior_save(p, path.c_str()) == MNPFS_OK);
  mnpfs_prior* back = nullptr;
  REQUIRE(mnpfs_prior_load(path.c_str(), &back) == MNPFS_OK);
  double again = 0.0;
  REQUIRE(mnpfs_prior_log_density(back, kappa.data(), kappa.size(), &again) == MNPFS_OK);
  CHECK(again == density);
  mnpfs_prior_free(back);
  mnpfs_prior_free(p);

  c.nu = 0.0;
  CHECK(mnpfs_prior_calibrate(&c, &p) == MNPFS_ERR_INVALID_ARGUMENT);
}

TEST_CASE("calibrate command solves for the equicorrelated mean") {
  const fs::path dir = Scratch("calibrate");
  mnpfs_calibrate_options c;
  mnpfs_calibrate_options_init(&c);
  c.J = 2;
  c.M = 4000;
  c.solve_mu_gamma = 1;
  c.solver_draws = 20000;
  double mu = 0.0;
  std::vector<std::string> lines;
  auto collect = [](const char* msg, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(msg); };
  const std::string out = (dir / "eq.txt").string();
  REQUIRE(mnpfs_cmd_calibrate(&c, out.c_str(), nullptr, &mu, collect, &lines) == MNPFS_OK);
  CHECK(mu == doctest::Approx(1.525).epsilon(0.05));
  CHECK_FALSE(lines.empty());
  CHECK(fs::exists(dir / "eq.txt.diagnostics.csv"));
  CHECK(mnpfs_cmd_calibrate(&c, nullptr, nullptr, nullptr, nullptr, nullptr) == MNPFS_ERR_INVALID_ARGUMENT);
}

TEST_CASE("fit, evaluate and experiment commands") {
  const fs::path dir = Scratch("commands");
  mnpfs_dgp_options dgp;
  mnpfs_dgp_options_init(&dgp);
  dgp.num_alternatives = 3;
  dgp.num_observations = 100;
  const std::string data = (dir / "d.csv").string();
  REQUIRE(mnpfs_cmd_simulate(&dgp, data.c_str(), nullptr) == MNPFS_OK);

  mnpfs_calibrate_options c;
  mnpfs_calibrate_options_init(&c);
  c.J = 2;
  c.M = 4000;
  const std::string prior = (dir / "prior.txt").string();
  REQUIRE(mnpfs_cmd_calibrate(&c, prior.c_str(), nullptr, nullptr, nullptr, nullptr) == MNPFS_OK);

  mnpfs_fit_options fit;
  mnpfs_fit_options_init(&fit);
  CHECK(fit.train_fraction == 0.8);
  CHECK(fit.include_intercept == 1);
  fit.data = data.c_str();
  const std::string run_fs = (dir / "fs").string();
  fit.run_dir = run_fs.c_str();
  fit.sampler = ShortSampler(80, 40);
  fit.eval.pmf_max_draws = 20;
  mnpfs_fit_summary summary;
  CHECK(mnpfs_cmd_fit(&fit, &summary, nullptr, nullptr) == MNPFS_ERR_INVALID_ARGUMENT);
  CHECK(std::string(mnpfs_last_error()).find("calibrate") != std::string::npos);
  fit.prior = prior.c_str();
  REQUIRE(mnpfs_cmd_fit(&fit, &summary, nullptr, nullptr) == MNPFS_OK);
  CHECK(summary.has_out_of_sample == 1);
  CHECK(summary.hit_rate_in >= 0.0);
  CHECK(summary.hit_rate_in <= 1.0);
  CHECK(summary.log_score_out < 0.0);
  CHECK(fs::exists(dir / "fs" / "kappa.csv"));

  mnpfs_fit_options naive = fit;
  naive.variant = "naive";
  const std::string run_naive = (dir / "naive").string();
  naive.run_dir = run_naive.c_str();
  REQUIRE(mnpfs_cmd_fit(&naive, &summary, nullptr, nullptr) == MNPFS_OK);

  const char* runs[] = {run_fs.c_str(), run_naive.c_str()};
  mnpfs_evaluate_options eval;
  mnpfs_evaluate_options_init(&eval);
  eval.runs = runs;
  eval.num_runs = 2;
  const std::string eval_out = (dir / "eval").string();
  eval.output = eval_out.c_str();
  eval.eval.pmf_max_draws = 20;
  REQUIRE(mnpfs_cmd_evaluate(&eval, nullptr, nullptr) == MNPFS_OK);
  CHECK(fs::exists(dir / "eval" / "comparison.csv"));
  CHECK(fs::exists(dir / "eval" / "pvalues.csv"));
  eval.num_runs = 0;
  CHECK(mnpfs_cmd_evaluate(&eval, nullptr, nullptr) != MNPFS_OK);

  const char* overrides[] = {"dgp.num_alternatives=3",    "dgp.N=100",          "sampler.total_iterations=100",
                             "sampler.burn_in=50",         "prior.M=4000",       "eval.pmf_max_draws=10"};
  mnpfs_experiment_options exp;
  mnpfs_experiment_options_init(&exp);
  const std::string exp_dir = (dir / "exp").string();
  exp.run_dir = exp_dir.c_str();
  exp.overrides = overrides;
  exp.num_overrides = 6;
  mnpfs_experiment_summary es;
  REQUIRE(mnpfs_cmd_experiment(&exp, &es, nullptr, nullptr) == MNPFS_OK);
  CHECK(es.has_recovery == 1);
  CHECK(es.has_sensitivity == 0);
  CHECK(es.coefficient_rmse >= es.coefficient_mae);
  CHECK(es.log_score_out_factor < 0.0);
  CHECK(es.log_score_out_identity < 0.0);
  CHECK(fs::exists(dir / "exp" / "recovery.csv"));

  const char* bad[] = {"dgp.colour=blue"};
  exp.overrides = bad;
  exp.num_overrides = 1;
  CHECK(mnpfs_cmd_experiment(&exp, &es, nullptr, nullptr) == MNPFS_ERR_INVALID_ARGUMENT);
  const char* malformed[] = {"no_equals"};
  exp.overrides = malformed;
  CHECK(mnpfs_cmd_experiment(&exp, &es, nullptr, nullptr) == MNPFS_ERR_INVALID_ARGUMENT);
}
