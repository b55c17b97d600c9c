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

#ifndef MNPFS_CHOICE_DATA_HPP_
#define MNPFS_CHOICE_DATA_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mnpfs/types.hpp"

namespace mnpfs {

// Observed discrete choices with their covariates.
//
// Categories are internal indices 0..J, where category 0 is the base that
// the other utilities are differenced against. alt_labels maps each
// internal category back to the alternative id it came from, so relabeled
// datasets can still report results in the original ids.
struct ChoiceDataset {
  std::size_t num_alternatives = 0;  // J + 1
  std::vector<int> choices;          // one entry per observation, in [0, J]
  // Observation i owns rows [i*(J+1), (i+1)*(J+1)); one column per
  // alternative-specific covariate (e.g. log price).
  RowMatrix alt_covariates;
  RowMatrix indiv_covariates;  // N x k_d, may have zero columns
  bool include_intercept = true;
  std::vector<int> alt_labels;  // size J+1; empty means identity
  std::vector<long long> obs_ids;
  std::vector<std::string> alt_names;
  std::vector<std::string> indiv_names;

  std::size_t N() const { return choices.size(); }
  std::size_t J() const { return num_alternatives - 1; }
  std::size_t k_a() const { return static_cast<std::size_t>(alt_covariates.cols()); }
  std::size_t k_d() const { return static_cast<std::size_t>(indiv_covariates.cols()); }
  std::size_t K() const;
  int base_category() const { return alt_labels.empty() ? 0 : alt_labels[0]; }
  int Label(int category) const { return alt_labels.empty() ? category : alt_labels[category]; }

  auto AltBlock(std::size_t i) const {
    return alt_covariates.middleRows(static_cast<Eigen::Index>(i * num_alternatives),
                                     static_cast<Eigen::Index>(num_alternatives));
  }

  // Throws kInvalidArgument naming the first broken invariant.
  void Validate() const;
};

// Mean and standard deviation per covariate column, as applied before
// sampling.
struct ScalingRecord {
  Vector alt_mean;
  Vector alt_sd;
  Vector indiv_mean;
  Vector indiv_sd;
  bool unstandardized = false;
};

std::size_t NumCoefficients(std::size_t J, std::size_t k_a, std::size_t k_d, bool intercept);

// Differenced J x K design [I_J | x_d' (x) I_J | T x_a] with T = [-1 | I_J].
Matrix BuildDesignRow(const ChoiceDataset& data, std::size_t i);

// All design rows stacked: observation i occupies rows [i*J, (i+1)*J).
RowMatrix BuildDesign(const ChoiceDataset& data);

// 0 if every differenced utility is negative, else the 1-based index of the
// largest one (lowest index on ties).
int ChoiceFromUtilities(std::span<const double> z);

// Swaps category new_base with category 0 (a transposition, so applying it
// twice restores the original dataset).
ChoiceDataset RelabelBaseCategory(const ChoiceDataset& data, int new_base);

// Scales every covariate column to unit sample variance. Alternative
// covariates are pooled over alternatives and observations. Columns are
// centred too, except individual covariates in a model without intercepts
// (centring would not be invertible there).
std::pair<ChoiceDataset, ScalingRecord> StandardizeCovariates(const ChoiceDataset& data);

ChoiceDataset ApplyScaling(const ChoiceDataset& data, const ScalingRecord& record);

// Maps coefficients fitted on standardized covariates back to the original
// covariate scale.
Vector UnstandardizeCoefficients(const Vector& beta, const ScalingRecord& record, std::size_t J,
                                 bool intercept);

ChoiceDataset SubsetObservations(const ChoiceDataset& data, std::span<const std::size_t> rows);

// Long format: obs_id, alt_id, chosen, <alternative covariates...>; optional
// companion file obs_id, <individual covariates...>.
ChoiceDataset LoadChoiceCsv(const std::filesystem::path& path,
                            const std::optional<std::filesystem::path>& indiv_path = std::nullopt,
                            bool include_intercept = true);

void WriteChoiceCsv(const ChoiceDataset& data, const std::filesystem::path& path,
                    const std::optional<std::filesystem::path>& indiv_path = std::nullopt);

}  // namespace mnpfs

#endif  // MNPFS_CHOICE_DATA_HPP_
