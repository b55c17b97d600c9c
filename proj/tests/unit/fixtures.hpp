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


// Small synthetic datasets for the unit tests. Utilities are generated
// here directly from the model equations, independently of the library's
// own simulator.

#ifndef MNPFS_TESTS_FIXTURES_HPP_
#define MNPFS_TESTS_FIXTURES_HPP_

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mnpfs/choice_data.hpp"

namespace fixtures {

struct Spec {
  std::size_t alternatives = 3;
  std::size_t N = 200;
  std::size_t k_a = 1;
  std::size_t k_d = 0;
  bool intercept = true;
  double alt_mean = 0.0;
  double alt_sd = 1.0;
  double indiv_mean = 0.0;
  double indiv_sd = 1.0;
  std::uint64_t seed = 1;
};

// Undifferenced utilities: alpha_j (alpha_0 = 0) + x_d' delta_j + x_{ij}' b
// + e_i with e_i ~ N(0, Sigma_tilde). Only differences matter, so the
// truth is reported through the differenced coefficient vector.
inline mnpfs::ChoiceDataset Simulate(const Spec& spec, const Eigen::VectorXd& beta,
                                     const Eigen::MatrixXd& sigma_diff) {
  const std::size_t A = spec.alternatives, J = A - 1;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  mnpfs::ChoiceDataset d;
  d.num_alternatives = A;
  d.include_intercept = spec.intercept;
  d.alt_covariates.resize(static_cast<Eigen::Index>(spec.N * A), static_cast<Eigen::Index>(spec.k_a));
  d.indiv_covariates.resize(spec.k_d > 0 ? static_cast<Eigen::Index>(spec.N) : 0,
                            static_cast<Eigen::Index>(spec.k_d));
  const Eigen::MatrixXd L = sigma_diff.llt().matrixL();
  for (std::size_t i = 0; i < spec.N; ++i) {
    for (std::size_t r = 0; r < A; ++r)
      for (std::size_t c = 0; c < spec.k_a; ++c)
        d.alt_covariates(static_cast<Eigen::Index>(i * A + r), static_cast<Eigen::Index>(c)) =
            spec.alt_mean + spec.alt_sd * normal(rng);
    for (std::size_t c = 0; c < spec.k_d; ++c)
      d.indiv_covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          spec.indiv_mean + spec.indiv_sd * normal(rng);
    Eigen::VectorXd e(static_cast<Eigen::Index>(J));
    for (auto& v : e) v = normal(rng);
    e = L * e;
    std::vector<double> z(J);
    for (std::size_t j = 0; j < J; ++j) {
      double m = 0.0;
      std::size_t pos = 0;
      if (spec.intercept) m += beta(static_cast<Eigen::Index>(pos + j)), pos += J;
      for (std::size_t c = 0; c < spec.k_d; ++c, pos += J)
        m += d.indiv_covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) *
             beta(static_cast<Eigen::Index>(pos + j));
      for (std::size_t c = 0; c < spec.k_a; ++c)
        m += (d.alt_covariates(static_cast<Eigen::Index>(i * A + j + 1), static_cast<Eigen::Index>(c)) -
              d.alt_covariates(static_cast<Eigen::Index>(i * A), static_cast<Eigen::Index>(c))) *
             beta(static_cast<Eigen::Index>(pos + c));
      z[j] = m + e(static_cast<Eigen::Index>(j));
    }
    const auto top = std::max_element(z.begin(), z.end());
    d.choices.push_back(*top < 0.0 ? 0 : static_cast<int>(top - z.begin()) + 1);
    d.obs_ids.push_back(static_cast<long long>(i + 1));
  }
  return d;
}

}  // namespace fixtures

#endif  // MNPFS_TESTS_FIXTURES_HPP_
