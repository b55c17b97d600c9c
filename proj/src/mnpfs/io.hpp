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

#ifndef MNPFS_IO_HPP_
#define MNPFS_IO_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mnpfs/choice_data.hpp"
#include "mnpfs/csv.hpp"
#include "mnpfs/evaluation.hpp"
#include "mnpfs/experiment.hpp"
#include "mnpfs/sampler.hpp"

namespace mnpfs {

// Ordered "key = value" lines; '#' starts a comment line.
class Manifest {
 public:
  void Set(const std::string& key, const std::string& value);
  void Set(const std::string& key, const char* value) { Set(key, std::string(value)); }
  template <typename T>
    requires std::is_arithmetic_v<T>
  void Set(const std::string& key, T value) {
    if constexpr (std::is_same_v<T, bool>) {
      Set(key, std::string(value ? "true" : "false"));
    } else if constexpr (std::is_integral_v<T>) {
      Set(key, std::to_string(value));
    } else {
      Set(key, csv::FormatDouble(static_cast<double>(value)));
    }
  }
  bool Has(const std::string& key) const;
  std::optional<std::string> Get(const std::string& key) const;
  // Throws kInvalidArgument when the key is absent.
  std::string Require(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void Write(const std::filesystem::path& path) const;
  static Manifest Read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// beta.csv and kappa.csv, one row per retained draw.
void WriteDrawTables(const PosteriorDraws& draws, const std::filesystem::path& dir);
// Metadata sidecar: config echo, seed, acceptance summary.
void WriteDrawMeta(const PosteriorDraws& draws, const std::filesystem::path& dir);
PosteriorDraws ReadDraws(const std::filesystem::path& dir);

void WriteSplit(const ChoiceDataset& data, const Split& split, const std::filesystem::path& path);
// Observation ids of the training and test sets.
std::pair<std::vector<long long>, std::vector<long long>> ReadSplit(const std::filesystem::path& path);

void WriteScaling(const ScalingRecord& record, const std::filesystem::path& path);
ScalingRecord ReadScaling(const std::filesystem::path& path);

// obs_id, choice, then one probability column per alternative label.
void WritePmf(const ChoiceDataset& data, const PredictivePmf& pmf, const std::filesystem::path& path);
// Returns the pmf and the observed choices (internal indices).
std::pair<PredictivePmf, std::vector<int>> ReadPmf(const std::filesystem::path& path);

// p_vs_reference is blank when empty.
struct MetricRow {
  std::string model;
  std::string sample;
  std::optional<double> hit_rate;
  std::optional<double> log_score;
  std::optional<double> p_vs_reference;
};

// One row per (model, sample, metric).
std::vector<MetricRow> MetricRows(const MetricReport& report);
void WriteMetricsCsv(const std::vector<MetricRow>& rows, const std::filesystem::path& path);
std::string FormatMetricTable(const std::vector<MetricReport>& reports);

void WriteAcceptance(const PosteriorDraws& draws, const std::filesystem::path& path);
void WriteTruth(const Truth& truth, const std::filesystem::path& beta_path, const std::filesystem::path& sigma_path);
void WriteMatrixCsv(const Matrix& m, const std::filesystem::path& path, const std::string& prefix);

}  // namespace mnpfs

#endif  // MNPFS_IO_HPP_
