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

#include "mnpfs/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mnpfs/csv.hpp"
#include "mnpfs/error.hpp"

namespace mnpfs {

namespace {

std::ofstream OpenOut(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t ParseSize(const std::string& text, const std::string& context) {
  const long long v = csv::ParseInt(text, context);
  if (v < 0) Fail(ErrorCode::kParse, context + " must be non-negative");
  return static_cast<std::size_t>(v);
}

Matrix ReadNumericTable(const std::filesystem::path& path, std::size_t expected_cols) {
  const csv::Table t = csv::Read(path);
  if (t.header.size() != expected_cols) {
    Fail(ErrorCode::kParse, path.string() + ": expected " + std::to_string(expected_cols) + " columns");
  }
  Matrix m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(expected_cols));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < expected_cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = csv::ParseDouble(t.rows[r][c], t.header[c]);
    }
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

void Manifest::Set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

bool Manifest::Has(const std::string& key) const { return Get(key).has_value(); }

std::optional<std::string> Manifest::Get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string Manifest::Require(const std::string& key) const {
  auto v = Get(key);
  if (!v) Fail(ErrorCode::kInvalidArgument, "manifest has no '" + key + "' entry");
  return *v;
}

void Manifest::Write(const std::filesystem::path& path) const {
  std::ofstream out = OpenOut(path);
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
  out.flush();
  if (!out) Fail(ErrorCode::kIo, "failed writing " + path.string());
}

Manifest Manifest::Read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  Manifest m;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorCode::kParse, path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    const std::string key = Trim(t.substr(0, eq));
    if (key.empty()) Fail(ErrorCode::kParse, path.string() + ":" + std::to_string(number) + ": empty key");
    m.Set(key, Trim(t.substr(eq + 1)));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Draws

void WriteDrawTables(const PosteriorDraws& draws, const std::filesystem::path& dir) {
  std::ofstream beta = OpenOut(dir / "beta.csv");
  for (Eigen::Index k = 0; k < draws.beta.cols(); ++k) beta << (k ? "," : "") << "beta" << (k + 1);
  beta << '\n';
  for (Eigen::Index m = 0; m < draws.beta.rows(); ++m) {
    for (Eigen::Index k = 0; k < draws.beta.cols(); ++k) beta << (k ? "," : "") << csv::FormatDouble(draws.beta(m, k));
    beta << '\n';
  }
  std::ofstream kappa = OpenOut(dir / "kappa.csv");
  for (Eigen::Index l = 0; l < draws.kappa.cols(); ++l) kappa << (l ? "," : "") << "kappa" << (l + 1);
  kappa << '\n';
  for (Eigen::Index m = 0; m < draws.kappa.rows(); ++m) {
    for (Eigen::Index l = 0; l < draws.kappa.cols(); ++l) kappa << (l ? "," : "") << csv::FormatDouble(draws.kappa(m, l));
    kappa << '\n';
  }
}

void WriteDrawMeta(const PosteriorDraws& draws, const std::filesystem::path& dir) {
  const SamplerConfig& c = draws.config;
  Manifest m;
  m.Set("variant", VariantName(draws.variant));
  m.Set("J", draws.J);
  m.Set("q", draws.q);
  m.Set("K", static_cast<std::size_t>(draws.beta.cols()));
  m.Set("draws", draws.count());
  m.Set("total_iterations", c.total_iterations);
  m.Set("burn_in", c.burn_in);
  m.Set("thinning", c.thinning);
  m.Set("seed", c.seed);
  m.Set("beta_prior_variance", c.beta_prior_variance);
  m.Set("block_size", c.block_size);
  m.Set("adaptation_batch", c.adaptation_batch);
  m.Set("target_low", c.target_low);
  m.Set("target_high", c.target_high);
  m.Set("initial_proposal_sd", c.initial_proposal_sd);
  m.Set("seconds_per_iteration", draws.seconds_per_iteration);
  if (draws.acceptance_rate.size() > 0) {
    m.Set("acceptance.mean", draws.acceptance_rate.mean());
    m.Set("acceptance.min", draws.acceptance_rate.minCoeff());
    m.Set("acceptance.max", draws.acceptance_rate.maxCoeff());
    for (Eigen::Index l = 0; l < draws.acceptance_rate.size(); ++l) {
      m.Set("acceptance." + std::to_string(l + 1), draws.acceptance_rate(l));
    }
  }
  m.Write(dir / "draws_meta.txt");
}

PosteriorDraws ReadDraws(const std::filesystem::path& dir) {
  const Manifest m = Manifest::Read(dir / "draws_meta.txt");
  PosteriorDraws d;
  d.variant = ParseVariant(m.Require("variant"));
  d.J = ParseSize(m.Require("J"), "J");
  d.q = ParseSize(m.Require("q"), "q");
  const std::size_t K = ParseSize(m.Require("K"), "K");
  SamplerConfig& c = d.config;
  c.variant = d.variant;
  c.q = d.q;
  c.total_iterations = ParseSize(m.Require("total_iterations"), "total_iterations");
  c.burn_in = ParseSize(m.Require("burn_in"), "burn_in");
  c.thinning = ParseSize(m.Require("thinning"), "thinning");
  c.seed = static_cast<std::uint64_t>(csv::ParseInt(m.Require("seed"), "seed"));
  c.beta_prior_variance = csv::ParseDouble(m.Require("beta_prior_variance"), "beta_prior_variance");
  d.seconds_per_iteration = csv::ParseDouble(m.Require("seconds_per_iteration"), "seconds_per_iteration");
  d.beta = ReadNumericTable(dir / "beta.csv", K);
  const std::size_t angles = d.variant == ModelVariant::kFactor ? NumFreeParams(d.J, d.q) - 1 : 0;
  if (angles > 0) {
    d.kappa = ReadNumericTable(dir / "kappa.csv", angles);
    if (d.kappa.rows() != d.beta.rows()) Fail(ErrorCode::kParse, dir.string() + ": beta and kappa draw counts differ");
  } else {
    d.kappa.resize(d.beta.rows(), 0);
  }
  d.acceptance_rate.resize(static_cast<Eigen::Index>(angles));
  for (std::size_t l = 0; l < angles; ++l) {
    const auto v = m.Get("acceptance." + std::to_string(l + 1));
    d.acceptance_rate(static_cast<Eigen::Index>(l)) = v ? csv::ParseDouble(*v, "acceptance") : 0.0;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Split, scaling, pmf

void WriteSplit(const ChoiceDataset& data, const Split& split, const std::filesystem::path& path) {
  std::ofstream out = OpenOut(path);
  out << "obs_id,set\n";
  auto id = [&](std::size_t i) { return data.obs_ids.empty() ? static_cast<long long>(i) : data.obs_ids[i]; };
  for (std::size_t i : split.train) out << id(i) << ",train\n";
  for (std::size_t i : split.test) out << id(i) << ",test\n";
}

std::pair<std::vector<long long>, std::vector<long long>> ReadSplit(const std::filesystem::path& path) {
  const csv::Table t = csv::Read(path);
  const std::size_t c_id = t.Column("obs_id");
  const std::size_t c_set = t.Column("set");
  std::pair<std::vector<long long>, std::vector<long long>> out;
  for (const auto& row : t.rows) {
    const long long id = csv::ParseInt(row[c_id], "obs_id");
    if (row[c_set] == "train") {
      out.first.push_back(id);
    } else if (row[c_set] == "test") {
      out.second.push_back(id);
    } else {
      Fail(ErrorCode::kParse, path.string() + ": unknown set '" + row[c_set] + "'");
    }
  }
  return out;
}

void WriteScaling(const ScalingRecord& record, const std::filesystem::path& path) {
  std::ofstream out = OpenOut(path);
  out << "group,index,mean,sd\n";
  for (Eigen::Index c = 0; c < record.alt_mean.size(); ++c) {
    out << "alt," << c << ',' << csv::FormatDouble(record.alt_mean(c)) << ',' << csv::FormatDouble(record.alt_sd(c)) << '\n';
  }
  for (Eigen::Index c = 0; c < record.indiv_mean.size(); ++c) {
    out << "indiv," << c << ',' << csv::FormatDouble(record.indiv_mean(c)) << ',' << csv::FormatDouble(record.indiv_sd(c))
        << '\n';
  }
}

ScalingRecord ReadScaling(const std::filesystem::path& path) {
  const csv::Table t = csv::Read(path);
  const std::size_t c_group = t.Column("group"), c_mean = t.Column("mean"), c_sd = t.Column("sd");
  std::vector<double> am, as, im, is;
  for (const auto& row : t.rows) {
    const double mean = csv::ParseDouble(row[c_mean], "mean");
    const double sd = csv::ParseDouble(row[c_sd], "sd");
    if (row[c_group] == "alt") {
      am.push_back(mean);
      as.push_back(sd);
    } else if (row[c_group] == "indiv") {
      im.push_back(mean);
      is.push_back(sd);
    } else {
      Fail(ErrorCode::kParse, path.string() + ": unknown group '" + row[c_group] + "'");
    }
  }
  auto vec = [](const std::vector<double>& v) { return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))); };
  ScalingRecord r;
  r.alt_mean = vec(am);
  r.alt_sd = vec(as);
  r.indiv_mean = vec(im);
  r.indiv_sd = vec(is);
  return r;
}

void WritePmf(const ChoiceDataset& data, const PredictivePmf& pmf, const std::filesystem::path& path) {
  Require(pmf.N() == data.N(), "pmf rows do not match the data");
  std::ofstream out = OpenOut(path);
  out << "obs_id,choice";
  for (std::size_t c = 0; c < pmf.categories(); ++c) out << ",p_" << data.Label(static_cast<int>(c));
  out << '\n';
  for (std::size_t i = 0; i < data.N(); ++i) {
    out << (data.obs_ids.empty() ? static_cast<long long>(i) : data.obs_ids[i]) << ',' << data.Label(data.choices[i]);
    for (std::size_t c = 0; c < pmf.categories(); ++c) {
      out << ',' << csv::FormatDouble(pmf.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
    out << '\n';
  }
}

std::pair<PredictivePmf, std::vector<int>> ReadPmf(const std::filesystem::path& path) {
  const csv::Table t = csv::Read(path);
  const std::size_t c_choice = t.Column("choice");
  std::vector<std::size_t> prob_cols;
  std::vector<int> labels;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c].rfind("p_", 0) == 0) {
      prob_cols.push_back(c);
      labels.push_back(static_cast<int>(csv::ParseInt(t.header[c].substr(2), "category label")));
    }
  }
  if (prob_cols.size() < 2) Fail(ErrorCode::kParse, path.string() + ": no probability columns");
  std::pair<PredictivePmf, std::vector<int>> out;
  out.first.probs.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(prob_cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < prob_cols.size(); ++c) {
      out.first.probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          csv::ParseDouble(t.rows[r][prob_cols[c]], "probability");
    }
    const int label = static_cast<int>(csv::ParseInt(t.rows[r][c_choice], "choice"));
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) Fail(ErrorCode::kParse, path.string() + ": choice label " + std::to_string(label) + " has no column");
    out.second.push_back(static_cast<int>(it - labels.begin()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

std::vector<MetricRow> MetricRows(const MetricReport& report) {
  return {{report.model, report.sample, report.hit_rate, std::nullopt, std::nullopt},
          {report.model, report.sample, std::nullopt, report.log_score, std::nullopt}};
}

void WriteMetricsCsv(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  std::ofstream out = OpenOut(path);
  auto opt = [](const std::optional<double>& v) { return v ? csv::FormatDouble(*v) : std::string(); };
  out << "model,sample,hit_rate,log_score,p_vs_reference\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.sample << ',' << opt(r.hit_rate) << ',' << opt(r.log_score) << ','
        << opt(r.p_vs_reference) << '\n';
  }
}

std::string FormatMetricTable(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "model" << std::setw(8) << "sample" << std::right << std::setw(10) << "hit_rate"
      << std::setw(12) << "log_score" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    out << std::left << std::setw(10) << r.model << std::setw(8) << r.sample << std::right << std::setw(10) << r.hit_rate
        << std::setw(12) << r.log_score << '\n';
  }
  return out.str();
}

void WriteAcceptance(const PosteriorDraws& draws, const std::filesystem::path& path) {
  std::ofstream out = OpenOut(path);
  out << "angle,upper_bound,acceptance_rate\n";
  const auto n = static_cast<std::size_t>(draws.acceptance_rate.size());
  for (std::size_t l = 0; l < n; ++l) {
    out << (l + 1) << ',' << csv::FormatDouble(AngleUpperBound(l, n)) << ','
        << csv::FormatDouble(draws.acceptance_rate(static_cast<Eigen::Index>(l))) << '\n';
  }
}

void WriteMatrixCsv(const Matrix& m, const std::filesystem::path& path, const std::string& prefix) {
  std::ofstream out = OpenOut(path);
  for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << prefix << (c + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << csv::FormatDouble(m(r, c));
    out << '\n';
  }
}

void WriteTruth(const Truth& truth, const std::filesystem::path& beta_path, const std::filesystem::path& sigma_path) {
  std::ofstream out = OpenOut(beta_path);
  out << "index,value\n";
  for (Eigen::Index k = 0; k < truth.beta.size(); ++k) out << (k + 1) << ',' << csv::FormatDouble(truth.beta(k)) << '\n';
  WriteMatrixCsv(truth.sigma, sigma_path, "col");
}

}  // namespace mnpfs
