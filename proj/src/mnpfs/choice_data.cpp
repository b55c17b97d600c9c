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

#include "mnpfs/choice_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include "mnpfs/csv.hpp"
#include "mnpfs/error.hpp"

namespace mnpfs {

std::size_t NumCoefficients(std::size_t J, std::size_t k_a, std::size_t k_d, bool intercept) {
  return (intercept ? J : 0) + J * k_d + k_a;
}

std::size_t ChoiceDataset::K() const {
  return NumCoefficients(J(), k_a(), k_d(), include_intercept);
}

void ChoiceDataset::Validate() const {
  Require(num_alternatives >= 2, "need at least two alternatives");
  const auto n = static_cast<Eigen::Index>(N());
  Require(alt_covariates.cols() == 0 ||
              alt_covariates.rows() == n * static_cast<Eigen::Index>(num_alternatives),
          "alternative covariates must have J+1 rows per observation");
  Require(indiv_covariates.cols() == 0 || indiv_covariates.rows() == n,
          "individual covariates must have one row per observation");
  for (int y : choices) {
    Require(y >= 0 && static_cast<std::size_t>(y) < num_alternatives, "choice outside 0..J");
  }
  Require(alt_labels.empty() || alt_labels.size() == num_alternatives, "alt_labels must have J+1 entries");
  Require(obs_ids.empty() || obs_ids.size() == N(), "obs_ids must have one entry per observation");
  Require(K() > 0, "model has no coefficients");
}

Matrix BuildDesignRow(const ChoiceDataset& data, std::size_t i) {
  Require(i < data.N(), "observation index out of range");
  const auto J = static_cast<Eigen::Index>(data.J());
  const auto k_a = static_cast<Eigen::Index>(data.k_a());
  const auto k_d = static_cast<Eigen::Index>(data.k_d());
  if (k_a > 0 && data.alt_covariates.rows() < static_cast<Eigen::Index>((i + 1) * data.num_alternatives)) {
    Fail(ErrorCode::kMismatch, "alternative covariates shorter than declared");
  }
  if (k_d > 0 && data.indiv_covariates.rows() <= static_cast<Eigen::Index>(i)) {
    Fail(ErrorCode::kMismatch, "individual covariates shorter than declared");
  }
  Matrix X = Matrix::Zero(J, static_cast<Eigen::Index>(data.K()));
  Eigen::Index col = 0;
  if (data.include_intercept) {
    X.block(0, col, J, J).setIdentity();
    col += J;
  }
  for (Eigen::Index c = 0; c < k_d; ++c) {
    const double x = data.indiv_covariates(static_cast<Eigen::Index>(i), c);
    for (Eigen::Index j = 0; j < J; ++j) X(j, col + j) = x;
    col += J;
  }
  if (k_a > 0) {
    const auto block = data.AltBlock(i);
    for (Eigen::Index c = 0; c < k_a; ++c) {
      for (Eigen::Index j = 0; j < J; ++j) X(j, col + c) = block(j + 1, c) - block(0, c);
    }
  }
  return X;
}

RowMatrix BuildDesign(const ChoiceDataset& data) {
  const auto J = static_cast<Eigen::Index>(data.J());
  RowMatrix X(static_cast<Eigen::Index>(data.N()) * J, static_cast<Eigen::Index>(data.K()));
  for (std::size_t i = 0; i < data.N(); ++i) {
    X.middleRows(static_cast<Eigen::Index>(i) * J, J) = BuildDesignRow(data, i);
  }
  return X;
}

int ChoiceFromUtilities(std::span<const double> z) {
  int best = 0;
  double best_value = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j] >= 0.0 && (best == 0 || z[j] > best_value)) {
      best = static_cast<int>(j) + 1;
      best_value = z[j];
    }
  }
  return best;
}

ChoiceDataset RelabelBaseCategory(const ChoiceDataset& data, int new_base) {
  if (new_base < 0 || static_cast<std::size_t>(new_base) >= data.num_alternatives) {
    Fail(ErrorCode::kInvalidArgument, "base category " + std::to_string(new_base) + " outside 0..J");
  }
  ChoiceDataset out = data;
  if (new_base == 0) return out;
  if (out.alt_labels.empty()) {
    out.alt_labels.resize(out.num_alternatives);
    std::iota(out.alt_labels.begin(), out.alt_labels.end(), 0);
  }
  std::swap(out.alt_labels[0], out.alt_labels[static_cast<std::size_t>(new_base)]);
  for (int& y : out.choices) {
    if (y == 0) {
      y = new_base;
    } else if (y == new_base) {
      y = 0;
    }
  }
  if (out.k_a() > 0) {
    for (std::size_t i = 0; i < out.N(); ++i) {
      const auto base_row = static_cast<Eigen::Index>(i * out.num_alternatives);
      out.alt_covariates.row(base_row).swap(out.alt_covariates.row(base_row + new_base));
    }
  }
  return out;
}

namespace {

void ColumnMoments(const RowMatrix& m, Vector& mean, Vector& sd, bool center, const char* what) {
  const auto n = m.rows();
  mean = Vector::Zero(m.cols());
  sd = Vector::Ones(m.cols());
  if (m.cols() == 0) return;
  Require(n >= 2, "need at least two rows to standardize covariates");
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double mu = m.col(c).mean();
    const double var = (m.col(c).array() - mu).square().sum() / static_cast<double>(n - 1);
    if (!(var > 0.0)) {
      Fail(ErrorCode::kInvalidArgument,
           std::string(what) + " covariate column " + std::to_string(c) + " is constant");
    }
    mean(c) = center ? mu : 0.0;
    sd(c) = std::sqrt(var);
  }
}

}  // namespace

std::pair<ChoiceDataset, ScalingRecord> StandardizeCovariates(const ChoiceDataset& data) {
  ScalingRecord record;
  ColumnMoments(data.alt_covariates, record.alt_mean, record.alt_sd, true, "alternative");
  ColumnMoments(data.indiv_covariates, record.indiv_mean, record.indiv_sd, data.include_intercept,
                "individual");
  return {ApplyScaling(data, record), record};
}

ChoiceDataset ApplyScaling(const ChoiceDataset& data, const ScalingRecord& record) {
  Require(record.alt_sd.size() == data.alt_covariates.cols() &&
              record.indiv_sd.size() == data.indiv_covariates.cols(),
          "scaling record does not match dataset covariates");
  ChoiceDataset out = data;
  for (Eigen::Index c = 0; c < out.alt_covariates.cols(); ++c) {
    out.alt_covariates.col(c) = (out.alt_covariates.col(c).array() - record.alt_mean(c)) / record.alt_sd(c);
  }
  for (Eigen::Index c = 0; c < out.indiv_covariates.cols(); ++c) {
    out.indiv_covariates.col(c) =
        (out.indiv_covariates.col(c).array() - record.indiv_mean(c)) / record.indiv_sd(c);
  }
  return out;
}

Vector UnstandardizeCoefficients(const Vector& beta, const ScalingRecord& record, std::size_t J,
                                 bool intercept) {
  const auto k_a = record.alt_sd.size();
  const auto k_d = record.indiv_sd.size();
  const auto Ji = static_cast<Eigen::Index>(J);
  if (static_cast<std::size_t>(beta.size()) != NumCoefficients(J, k_a, k_d, intercept)) {
    Fail(ErrorCode::kMismatch, "coefficient vector does not match scaling record");
  }
  Vector out = beta;
  const Eigen::Index d0 = intercept ? Ji : 0;
  for (Eigen::Index c = 0; c < k_d; ++c) {
    const auto block = beta.segment(d0 + c * Ji, Ji);
    out.segment(d0 + c * Ji, Ji) = block / record.indiv_sd(c);
    if (intercept) out.head(Ji) -= block * (record.indiv_mean(c) / record.indiv_sd(c));
  }
  const Eigen::Index a0 = d0 + k_d * Ji;
  for (Eigen::Index c = 0; c < k_a; ++c) out(a0 + c) = beta(a0 + c) / record.alt_sd(c);
  return out;
}

ChoiceDataset SubsetObservations(const ChoiceDataset& data, std::span<const std::size_t> rows) {
  ChoiceDataset out;
  out.num_alternatives = data.num_alternatives;
  out.include_intercept = data.include_intercept;
  out.alt_labels = data.alt_labels;
  out.alt_names = data.alt_names;
  out.indiv_names = data.indiv_names;
  const auto A = static_cast<Eigen::Index>(data.num_alternatives);
  out.alt_covariates.resize(static_cast<Eigen::Index>(rows.size()) * A, data.alt_covariates.cols());
  out.indiv_covariates.resize(data.k_d() > 0 ? static_cast<Eigen::Index>(rows.size()) : 0,
                              data.indiv_covariates.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    Require(i < data.N(), "subset row out of range");
    out.choices.push_back(data.choices[i]);
    if (!data.obs_ids.empty()) out.obs_ids.push_back(data.obs_ids[i]);
    if (data.k_a() > 0) out.alt_covariates.middleRows(static_cast<Eigen::Index>(r) * A, A) = data.AltBlock(i);
    if (data.k_d() > 0) out.indiv_covariates.row(static_cast<Eigen::Index>(r)) = data.indiv_covariates.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

ChoiceDataset LoadChoiceCsv(const std::filesystem::path& path,
                            const std::optional<std::filesystem::path>& indiv_path,
                            bool include_intercept) {
  const csv::Table table = csv::Read(path);
  const std::size_t c_obs = table.Column("obs_id");
  const std::size_t c_alt = table.Column("alt_id");
  const std::size_t c_chosen = table.Column("chosen");
  std::vector<std::size_t> cov_cols;
  ChoiceDataset data;
  data.include_intercept = include_intercept;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != c_obs && c != c_alt && c != c_chosen) {
      cov_cols.push_back(c);
      data.alt_names.push_back(table.header[c]);
    }
  }
  if (table.rows.empty()) Fail(ErrorCode::kParse, path.string() + ": no observations");

  // Group rows by obs_id in order of first appearance.
  std::vector<long long> order;
  std::unordered_map<long long, std::vector<std::size_t>> groups;
  int max_alt = -1;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const long long id = csv::ParseInt(table.rows[r][c_obs], "obs_id");
    const auto alt = csv::ParseInt(table.rows[r][c_alt], "alt_id");
    if (alt < 0) Fail(ErrorCode::kParse, "negative alt_id for obs " + std::to_string(id));
    max_alt = std::max(max_alt, static_cast<int>(alt));
    auto [it, inserted] = groups.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(r);
  }
  data.num_alternatives = static_cast<std::size_t>(max_alt) + 1;
  if (data.num_alternatives < 2) Fail(ErrorCode::kParse, "need at least two alternatives");
  const auto A = static_cast<Eigen::Index>(data.num_alternatives);
  const auto k_a = static_cast<Eigen::Index>(cov_cols.size());
  data.alt_covariates.resize(static_cast<Eigen::Index>(order.size()) * A, k_a);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const long long id = order[i];
    const auto& rows = groups[id];
    if (rows.size() != data.num_alternatives) {
      Fail(ErrorCode::kParse, "obs " + std::to_string(id) + " has " + std::to_string(rows.size()) +
                                  " alternatives, expected " + std::to_string(data.num_alternatives));
    }
    std::vector<bool> seen(data.num_alternatives, false);
    int chosen = -1;
    for (std::size_t r : rows) {
      const auto& f = table.rows[r];
      const auto alt = static_cast<std::size_t>(csv::ParseInt(f[c_alt], "alt_id"));
      if (seen[alt]) Fail(ErrorCode::kParse, "obs " + std::to_string(id) + " repeats alt_id " + std::to_string(alt));
      seen[alt] = true;
      const auto flag = csv::ParseInt(f[c_chosen], "chosen");
      if (flag != 0 && flag != 1) Fail(ErrorCode::kParse, "chosen must be 0 or 1");
      if (flag == 1) {
        if (chosen >= 0) Fail(ErrorCode::kParse, "obs " + std::to_string(id) + " has more than one chosen alternative");
        chosen = static_cast<int>(alt);
      }
      for (Eigen::Index c = 0; c < k_a; ++c) {
        data.alt_covariates(static_cast<Eigen::Index>(i) * A + static_cast<Eigen::Index>(alt), c) =
            csv::ParseDouble(f[cov_cols[static_cast<std::size_t>(c)]], table.header[cov_cols[static_cast<std::size_t>(c)]]);
      }
    }
    if (chosen < 0) Fail(ErrorCode::kParse, "obs " + std::to_string(id) + " has no chosen alternative");
    data.choices.push_back(chosen);
    data.obs_ids.push_back(id);
  }

  if (indiv_path) {
    const csv::Table indiv = csv::Read(*indiv_path);
    const std::size_t ci_obs = indiv.Column("obs_id");
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < indiv.header.size(); ++c) {
      if (c != ci_obs) {
        cols.push_back(c);
        data.indiv_names.push_back(indiv.header[c]);
      }
    }
    std::unordered_map<long long, std::size_t> row_of;
    for (std::size_t r = 0; r < indiv.rows.size(); ++r) {
      row_of[csv::ParseInt(indiv.rows[r][ci_obs], "obs_id")] = r;
    }
    data.indiv_covariates.resize(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto it = row_of.find(order[i]);
      if (it == row_of.end()) Fail(ErrorCode::kParse, "obs " + std::to_string(order[i]) + " missing from individual covariates");
      for (std::size_t c = 0; c < cols.size(); ++c) {
        data.indiv_covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            csv::ParseDouble(indiv.rows[it->second][cols[c]], indiv.header[cols[c]]);
      }
    }
  }
  data.Validate();
  return data;
}

void WriteChoiceCsv(const ChoiceDataset& data, const std::filesystem::path& path,
                    const std::optional<std::filesystem::path>& indiv_path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  std::vector<std::string> header{"obs_id", "alt_id", "chosen"};
  for (std::size_t c = 0; c < data.k_a(); ++c) {
    header.push_back(c < data.alt_names.size() ? data.alt_names[c] : "x" + std::to_string(c + 1));
  }
  out << csv::Join(header) << '\n';
  // Rows are written in original alternative order so that relabeled data
  // serializes to the same file.
  std::vector<std::size_t> category_of(data.num_alternatives);
  for (std::size_t c = 0; c < data.num_alternatives; ++c) {
    category_of[static_cast<std::size_t>(data.Label(static_cast<int>(c)))] = c;
  }
  for (std::size_t i = 0; i < data.N(); ++i) {
    const long long id = data.obs_ids.empty() ? static_cast<long long>(i) : data.obs_ids[i];
    for (std::size_t label = 0; label < data.num_alternatives; ++label) {
      const std::size_t c = category_of[label];
      out << id << ',' << label << ',' << (data.choices[i] == static_cast<int>(c) ? 1 : 0);
      for (std::size_t k = 0; k < data.k_a(); ++k) {
        out << ',' << csv::FormatDouble(data.alt_covariates(static_cast<Eigen::Index>(i * data.num_alternatives + c), static_cast<Eigen::Index>(k)));
      }
      out << '\n';
    }
  }
  if (indiv_path && data.k_d() > 0) {
    std::ofstream ind(*indiv_path);
    if (!ind) Fail(ErrorCode::kIo, "cannot write " + indiv_path->string());
    std::vector<std::string> h{"obs_id"};
    for (std::size_t c = 0; c < data.k_d(); ++c) {
      h.push_back(c < data.indiv_names.size() ? data.indiv_names[c] : "d" + std::to_string(c + 1));
    }
    ind << csv::Join(h) << '\n';
    for (std::size_t i = 0; i < data.N(); ++i) {
      ind << (data.obs_ids.empty() ? static_cast<long long>(i) : data.obs_ids[i]);
      for (std::size_t c = 0; c < data.k_d(); ++c) {
        ind << ',' << csv::FormatDouble(data.indiv_covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
      }
      ind << '\n';
    }
  }
}

}  // namespace mnpfs
