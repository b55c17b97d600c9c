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

#include "mnpfs/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "mnpfs/csv.hpp"
#include "mnpfs/error.hpp"
#include "mnpfs/stats.hpp"
#include "mnpfs/version.hpp"

namespace mnpfs {

namespace fs = std::filesystem;

namespace {

void Note(const ProgressFn& progress, const std::string& msg) {
  if (progress) progress(msg);
}

fs::path Absolute(const fs::path& p) { return p.empty() ? p : fs::absolute(p).lexically_normal(); }

void RecordSampler(Manifest& m, const SamplerConfig& c) {
  m.Set("sampler.total_iterations", c.total_iterations);
  m.Set("sampler.burn_in", c.burn_in);
  m.Set("sampler.thinning", c.thinning);
  m.Set("sampler.beta_prior_variance", c.beta_prior_variance);
  m.Set("sampler.block_size", c.block_size);
  m.Set("sampler.adaptation_batch", c.adaptation_batch);
  m.Set("sampler.target_low", c.target_low);
  m.Set("sampler.target_high", c.target_high);
  m.Set("sampler.initial_proposal_sd", c.initial_proposal_sd);
  m.Set("sampler.seed", c.seed);
  m.Set("sampler.q", c.q);
}

void RecordFitOptions(Manifest& m, const FitOptions& f) {
  m.Set("eval.replicates", f.replicates);
  m.Set("eval.pmf_max_draws", f.pmf_max_draws);
  m.Set("eval.pmf_seed", f.pmf_seed);
  m.Set("threads", f.threads);
}

std::vector<std::size_t> IndicesOf(const ChoiceDataset& data, const std::vector<long long>& ids) {
  std::unordered_map<long long, std::size_t> row;
  for (std::size_t i = 0; i < data.N(); ++i) row[data.obs_ids.empty() ? static_cast<long long>(i) : data.obs_ids[i]] = i;
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (long long id : ids) {
    auto it = row.find(id);
    if (it == row.end()) Fail(ErrorCode::kMismatch, "observation " + std::to_string(id) + " is not in the dataset");
    out.push_back(it->second);
  }
  return out;
}

int InternalIndexOfLabel(const ChoiceDataset& data, int label) {
  for (std::size_t k = 0; k < data.num_alternatives; ++k) {
    if (data.Label(static_cast<int>(k)) == label) return static_cast<int>(k);
  }
  Fail(ErrorCode::kInvalidArgument, "no alternative with id " + std::to_string(label));
}

// Files of one fitted model, laid out so `evaluate` can read it.
void WriteVariantOutputs(const fs::path& dir, const VariantResult& v, const ChoiceDataset& train,
                         const ChoiceDataset& test) {
  if (v.draws) {
    WriteDrawMeta(*v.draws, dir);
    WriteAcceptance(*v.draws, dir / "acceptance.csv");
  }
  WritePmf(train, v.pmf_in, dir / "pmf_in.csv");
  if (test.N() > 0) WritePmf(test, v.pmf_out, dir / "pmf_out.csv");
  std::vector<MetricRow> rows;
  for (const char* sample : {"in", "out"}) {
    if (std::string(sample) == "out" && test.N() == 0) continue;
    for (auto& r : MetricRows(v.Report(sample))) rows.push_back(r);
  }
  WriteMetricsCsv(rows, dir / "metrics.csv");
}

}  // namespace

// ---------------------------------------------------------------------------
// calibrate

CalibratedPrior RunCalibrate(const CalibrateCommand& command, const ProgressFn& progress) {
  Require(!command.output.empty(), "an output path for the prior is required");
  Require(command.J >= 2, "J must be at least 2");
  NumFreeParams(command.J, command.q);
  Require(command.nu > 1.0, "nu must exceed 1");
  Require(command.sigma_gamma > 0.0, "sigma_gamma must be positive");

  Hyperparameters theta;
  theta.sigma_gamma = command.sigma_gamma;
  theta.nu = command.nu;
  theta.q = command.q;
  if (command.mu_gamma) {
    theta.mu_gamma = *command.mu_gamma;
  } else {
    Note(progress, "solving for the equicorrelated loading mean");
    theta.mu_gamma = SolveEquicorrelatedMu(command.sigma_gamma, command.nu, command.q, command.solver_draws, command.seed);
    Note(progress, "mu_gamma* = " + csv::FormatDouble(theta.mu_gamma));
  }
  CalibrationOptions options;
  options.M = command.M;
  options.seed = command.seed;
  options.threads = std::max<std::size_t>(1, command.threads);
  Note(progress, "calibrating " + std::to_string(NumFreeParams(command.J, command.q) - 1) + " margins");
  const CalibratedPrior prior = CalibratePrior(theta, command.J, options);
  if (command.output.has_parent_path()) fs::create_directories(command.output.parent_path());
  SavePrior(prior, command.output);

  const fs::path diag = command.diagnostics.empty() ? fs::path(command.output.string() + ".diagnostics.csv")
                                                    : command.diagnostics;
  std::ofstream out(diag);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + diag.string());
  out << "margin,mu,tau,eta,bound,avg_loglik,ks_distance,mu_gamma,mu_gamma_solved\n";
  for (std::size_t l = 0; l < prior.num_angles(); ++l) {
    const FlexibleMargin& m = prior.margins[l];
    out << (l + 1) << ',' << csv::FormatDouble(m.mu) << ',' << csv::FormatDouble(m.tau) << ','
        << csv::FormatDouble(m.eta) << ',' << csv::FormatDouble(m.upper_bound) << ','
        << csv::FormatDouble(prior.avg_loglik.at(l)) << ',' << csv::FormatDouble(prior.ks_distance.at(l)) << ','
        << csv::FormatDouble(theta.mu_gamma) << ',' << (command.mu_gamma ? "false" : "true") << '\n';
  }
  return prior;
}

// ---------------------------------------------------------------------------
// fit

std::vector<MetricReport> RunFit(const FitCommand& command, const ProgressFn& progress) {
  const ModelVariant variant = command.variant == kNaiveVariant ? ModelVariant::kIdentity : ParseVariant(command.variant);
  const bool factor = command.variant != kNaiveVariant && variant == ModelVariant::kFactor;
  Require(!command.run_dir.empty(), "a run directory is required");
  Require(!command.data.empty(), "a data file is required");
  if (factor && (command.prior.empty() || !fs::exists(command.prior))) {
    Fail(ErrorCode::kInvalidArgument, "prior file '" + command.prior.string() +
                                          "' not found; run 'calibrate' first or use --variant mnp-i");
  }
  command.sampler.Validate();

  fs::create_directories(command.run_dir);
  const fs::path dir = command.run_dir;
  Manifest manifest;
  manifest.Set("command", "fit");
  manifest.Set("version", kVersion);
  manifest.Set("variant", command.variant);
  manifest.Set("data", Absolute(command.data).string());
  if (command.indiv) manifest.Set("indiv", Absolute(*command.indiv).string());
  manifest.Set("intercept", command.include_intercept);
  if (factor) manifest.Set("prior", Absolute(command.prior).string());
  if (command.base) manifest.Set("base", *command.base);
  RecordSampler(manifest, command.sampler);
  manifest.Set("split.train_fraction", command.train_fraction);
  manifest.Set("split.seed", command.split_seed);
  RecordFitOptions(manifest, command.fit);
  for (const char* f : {"split.csv", "scaling.csv", "beta.csv", "kappa.csv", "draws_meta.txt", "pmf_in.csv",
                        "pmf_out.csv", "metrics.csv", "metrics.txt", "acceptance.csv"}) {
    manifest.Set(std::string("files.") + f, (dir / f).string());
  }
  manifest.Set("status", "running");
  manifest.Write(dir / "manifest.txt");

  ChoiceDataset data = LoadChoiceCsv(command.data, command.indiv, command.include_intercept);
  if (command.base) data = RelabelBaseCategory(data, InternalIndexOfLabel(data, *command.base));
  std::optional<CalibratedPrior> prior;
  if (factor) {
    prior = LoadPrior(command.prior);
    if (prior->J != data.J() || prior->q != command.sampler.q) {
      Fail(ErrorCode::kMismatch, "prior is for J=" + std::to_string(prior->J) + ", q=" + std::to_string(prior->q) +
                                     " but the data has J=" + std::to_string(data.J()) +
                                     " and q=" + std::to_string(command.sampler.q) + " was requested");
    }
  }
  const Split split = TrainTestSplit(data.N(), command.train_fraction, command.split_seed);
  WriteSplit(data, split, dir / "split.csv");
  auto [train, scaling] = StandardizeCovariates(SubsetObservations(data, split.train));
  const ChoiceDataset test = ApplyScaling(SubsetObservations(data, split.test), scaling);
  WriteScaling(scaling, dir / "scaling.csv");

  SamplerConfig sampler = command.sampler;
  sampler.stream_directory = dir;
  Note(progress, "fitting " + command.variant + " on " + std::to_string(train.N()) + " observations");
  const VariantResult result =
      FitAndEvaluate(command.variant, train, test, scaling, sampler, prior ? &*prior : nullptr, command.fit);
  WriteVariantOutputs(dir, result, train, test);
  std::vector<MetricReport> reports{result.Report("in")};
  if (test.N() > 0) reports.push_back(result.Report("out"));
  {
    std::ofstream txt(dir / "metrics.txt");
    txt << FormatMetricTable(reports);
  }
  manifest.Set("status", "complete");
  manifest.Set("seconds", result.seconds);
  manifest.Write(dir / "manifest.txt");
  return reports;
}

// ---------------------------------------------------------------------------
// simulate

void RunSimulate(const SimulateCommand& command) {
  Require(!command.output.empty(), "an output path is required");
  const SimulatedData sim = SimulateDataset(command.dgp);
  if (command.output.has_parent_path()) fs::create_directories(command.output.parent_path());
  WriteChoiceCsv(sim.data, command.output);
  fs::path prefix = command.truth_prefix;
  if (prefix.empty()) prefix = command.output.parent_path() / command.output.stem();
  WriteTruth(sim.truth, prefix.string() + "_truth_beta.csv", prefix.string() + "_truth_sigma.csv");
}

// ---------------------------------------------------------------------------
// experiment

ExperimentConfig DeskScaleExperiment() {
  ExperimentConfig c;
  c.dgp.num_alternatives = 10;
  c.dgp.N = 2000;
  c.sampler.total_iterations = 20000;
  c.sampler.burn_in = 10000;
  return c;
}

ExperimentConfig PaperScaleExperiment() {
  ExperimentConfig c;
  c.dgp.num_alternatives = 50;
  c.dgp.N = 5000;
  c.sampler.total_iterations = 200000;
  c.sampler.burn_in = 100000;
  return c;
}

void ApplyExperimentManifest(const Manifest& manifest, ExperimentConfig& config, SensitivityConfig& sens) {
  auto num = [](const std::string& v, const std::string& k) { return csv::ParseDouble(v, k); };
  auto size = [](const std::string& v, const std::string& k) {
    const long long x = csv::ParseInt(v, k);
    if (x < 0) Fail(ErrorCode::kInvalidArgument, k + " must be non-negative");
    return static_cast<std::size_t>(x);
  };
  auto u64 = [&](const std::string& v, const std::string& k) { return static_cast<std::uint64_t>(size(v, k)); };
  auto ints = [](const std::string& v, const std::string& k) {
    std::vector<int> out;
    for (const auto& f : csv::SplitLine(v)) {
      if (!f.empty()) out.push_back(static_cast<int>(csv::ParseInt(f, k)));
    }
    return out;
  };
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"dgp.num_alternatives", [&](auto& v, auto& k) { config.dgp.num_alternatives = size(v, k); }},
      {"dgp.N", [&](auto& v, auto& k) { config.dgp.N = size(v, k); }},
      {"dgp.intercept_variance", [&](auto& v, auto& k) { config.dgp.intercept_variance = num(v, k); }},
      {"dgp.price_coefficient", [&](auto& v, auto& k) { config.dgp.price_coefficient = num(v, k); }},
      {"dgp.iw_off_diagonal", [&](auto& v, auto& k) { config.dgp.iw_off_diagonal = num(v, k); }},
      {"dgp.seed", [&](auto& v, auto& k) { config.dgp.seed = u64(v, k); }},
      {"sampler.total_iterations", [&](auto& v, auto& k) { config.sampler.total_iterations = size(v, k); }},
      {"sampler.burn_in", [&](auto& v, auto& k) { config.sampler.burn_in = size(v, k); }},
      {"sampler.thinning", [&](auto& v, auto& k) { config.sampler.thinning = size(v, k); }},
      {"sampler.beta_prior_variance", [&](auto& v, auto& k) { config.sampler.beta_prior_variance = num(v, k); }},
      {"sampler.block_size", [&](auto& v, auto& k) { config.sampler.block_size = size(v, k); }},
      {"sampler.adaptation_batch", [&](auto& v, auto& k) { config.sampler.adaptation_batch = size(v, k); }},
      {"sampler.target_low", [&](auto& v, auto& k) { config.sampler.target_low = num(v, k); }},
      {"sampler.target_high", [&](auto& v, auto& k) { config.sampler.target_high = num(v, k); }},
      {"sampler.initial_proposal_sd", [&](auto& v, auto& k) { config.sampler.initial_proposal_sd = num(v, k); }},
      {"sampler.seed", [&](auto& v, auto& k) { config.sampler.seed = u64(v, k); }},
      {"sampler.q", [&](auto& v, auto& k) { config.sampler.q = size(v, k); }},
      {"prior.mu_gamma", [&](auto& v, auto& k) { config.theta.mu_gamma = num(v, k); }},
      {"prior.sigma_gamma", [&](auto& v, auto& k) { config.theta.sigma_gamma = num(v, k); }},
      {"prior.nu", [&](auto& v, auto& k) { config.theta.nu = num(v, k); }},
      {"prior.M", [&](auto& v, auto& k) { config.calibration.M = size(v, k); }},
      {"prior.seed", [&](auto& v, auto& k) { config.calibration.seed = u64(v, k); }},
      {"eval.variants",
       [&](auto& v, auto&) {
         config.variants.clear();
         for (const auto& f : csv::SplitLine(v)) {
           if (!f.empty()) config.variants.push_back(f);
         }
       }},
      {"eval.train_fraction", [&](auto& v, auto& k) { config.train_fraction = num(v, k); }},
      {"eval.split_seed", [&](auto& v, auto& k) { config.split_seed = u64(v, k); }},
      {"eval.replicates", [&](auto& v, auto& k) { config.fit.replicates = size(v, k); }},
      {"eval.pmf_max_draws", [&](auto& v, auto& k) { config.fit.pmf_max_draws = size(v, k); }},
      {"eval.pmf_seed", [&](auto& v, auto& k) { config.fit.pmf_seed = u64(v, k); }},
      {"sensitivity.bases", [&](auto& v, auto& k) { sens.bases = ints(v, k); }},
      {"sensitivity.categories", [&](auto& v, auto& k) { sens.categories = ints(v, k); }},
      {"sensitivity.grid_points", [&](auto& v, auto& k) { sens.grid_points = size(v, k); }},
      {"sensitivity.grid_span_sd", [&](auto& v, auto& k) { sens.grid_span_sd = num(v, k); }},
      {"sensitivity.solver_draws", [&](auto& v, auto& k) { sens.solver_draws = size(v, k); }},
  };
  for (const auto& [key, value] : manifest.entries()) {
    auto it = setters.find(key);
    if (it == setters.end()) Fail(ErrorCode::kInvalidArgument, "unknown experiment setting '" + key + "'");
    try {
      it->second(value, key);
    } catch (const Error& e) {
      Fail(ErrorCode::kInvalidArgument, "setting '" + key + "': " + e.what());
    }
  }
}

namespace {

void RecordExperiment(Manifest& m, const ExperimentConfig& c, const SensitivityConfig& s, bool sensitivity) {
  m.Set("dgp.num_alternatives", c.dgp.num_alternatives);
  m.Set("dgp.N", c.dgp.N);
  m.Set("dgp.intercept_variance", c.dgp.intercept_variance);
  m.Set("dgp.price_coefficient", c.dgp.price_coefficient);
  m.Set("dgp.iw_off_diagonal", c.dgp.iw_off_diagonal);
  m.Set("dgp.seed", c.dgp.seed);
  RecordSampler(m, c.sampler);
  m.Set("prior.mu_gamma", c.theta.mu_gamma);
  m.Set("prior.sigma_gamma", c.theta.sigma_gamma);
  m.Set("prior.nu", c.theta.nu);
  m.Set("prior.M", c.calibration.M);
  m.Set("prior.seed", c.calibration.seed);
  std::string variants;
  for (const auto& v : c.variants) variants += (variants.empty() ? "" : ",") + v;
  m.Set("eval.variants", variants);
  m.Set("eval.train_fraction", c.train_fraction);
  m.Set("eval.split_seed", c.split_seed);
  RecordFitOptions(m, c.fit);
  m.Set("sensitivity", sensitivity);
  if (sensitivity) {
    m.Set("sensitivity.grid_points", s.grid_points);
    m.Set("sensitivity.grid_span_sd", s.grid_span_sd);
    m.Set("sensitivity.solver_draws", s.solver_draws);
  }
}

ScoredRun Score(const VariantResult& v) { return {v.name, v.hits_in, v.hits_out, v.log_in, v.log_out}; }

void WriteScatter(const fs::path& path, const std::vector<double>& truth, const std::vector<double>& est) {
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "index,truth,estimate\n";
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out << (i + 1) << ',' << csv::FormatDouble(truth[i]) << ',' << csv::FormatDouble(est[i]) << '\n';
  }
}

std::vector<MetricRow> RowsWithPValues(const std::vector<Comparison>& comparisons) {
  std::vector<MetricRow> rows;
  for (const auto& c : comparisons) {
    MetricRow r{c.model, c.sample, std::nullopt, std::nullopt, c.test.p_value};
    if (c.metric == "hit_rate") {
      r.hit_rate = c.value;
    } else {
      r.log_score = c.value;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

ExperimentSummary RunExperiment(const ExperimentCommand& command, const ProgressFn& progress) {
  Require(!command.run_dir.empty(), "a run directory is required");
  const ExperimentConfig& config = command.config;
  config.dgp.Validate();
  config.sampler.Validate();
  const fs::path dir = command.run_dir;
  fs::create_directories(dir);

  ExperimentConfig run = config;
  run.fit.threads = std::max<std::size_t>(1, run.fit.threads);
  run.calibration.threads = run.fit.threads;
  run.draw_directory = dir;
  run.prior_cache = dir / "priors";
  SensitivityConfig sens = command.sensitivity;
  sens.sampler = run.sampler;
  sens.calibration = run.calibration;
  sens.q = run.sampler.q;
  sens.sigma_gamma = run.theta.sigma_gamma;
  sens.nu = run.theta.nu;
  sens.fit = run.fit;
  sens.prior_cache = run.prior_cache;

  Manifest manifest;
  manifest.Set("command", "experiment");
  manifest.Set("version", kVersion);
  RecordExperiment(manifest, run, sens, command.run_sensitivity);
  for (const char* f : {"dataset.csv", "truth_beta.csv", "truth_sigma.csv", "split.csv", "scaling.csv", "metrics.csv",
                        "metrics.txt", "recovery.csv", "scatter_coefficients.csv", "scatter_variances.csv",
                        "scatter_correlations.csv"}) {
    manifest.Set(std::string("files.") + f, (dir / f).string());
  }
  for (const auto& v : run.variants) manifest.Set("files.variant." + v, (dir / v).string());
  if (command.run_sensitivity) {
    manifest.Set("files.curves.csv", (dir / "curves.csv").string());
    manifest.Set("files.sensitivity.csv", (dir / "sensitivity.csv").string());
  }
  manifest.Set("status", "running");
  manifest.Write(dir / "manifest.txt");

  const ExperimentResult result = RunNumericalExperiment(run, progress);
  const ChoiceDataset& data = result.simulated.data;
  WriteChoiceCsv(data, dir / "dataset.csv");
  WriteTruth(result.simulated.truth, dir / "truth_beta.csv", dir / "truth_sigma.csv");
  WriteSplit(data, result.split, dir / "split.csv");
  WriteScaling(result.scaling, dir / "scaling.csv");

  auto [train, scaling] = StandardizeCovariates(SubsetObservations(data, result.split.train));
  const ChoiceDataset test = ApplyScaling(SubsetObservations(data, result.split.test), scaling);
  std::vector<ScoredRun> scored;
  for (const auto& v : result.variants) {
    const fs::path vdir = dir / v.name;
    fs::create_directories(vdir);
    Manifest vm;
    vm.Set("command", "experiment");
    vm.Set("version", kVersion);
    vm.Set("variant", v.name);
    vm.Set("data", Absolute(dir / "dataset.csv").string());
    vm.Set("intercept", true);
    RecordSampler(vm, run.sampler);
    vm.Set("split.train_fraction", run.train_fraction);
    vm.Set("split.seed", run.split_seed);
    RecordFitOptions(vm, run.fit);
    vm.Set("status", "complete");
    vm.Write(vdir / "manifest.txt");
    WriteSplit(data, result.split, vdir / "split.csv");
    WriteScaling(result.scaling, vdir / "scaling.csv");
    WriteVariantOutputs(vdir, v, train, test);
    scored.push_back(Score(v));
  }
  const std::vector<Comparison> comparisons = CompareToReference(scored);
  WriteMetricsCsv(RowsWithPValues(comparisons), dir / "metrics.csv");
  {
    std::ofstream txt(dir / "metrics.txt");
    txt << FormatMetricTable(result.metrics);
  }

  ExperimentSummary summary;
  summary.metrics = result.metrics;
  summary.has_recovery = result.has_recovery;
  if (result.has_recovery) {
    summary.coefficient_error = result.coefficient_error;
    summary.variance_error = result.variance_error;
    summary.correlation_error = result.correlation_error;
    summary.correlation_pearson = result.true_corr.size() >= 2 ? PearsonCorrelation(result.true_corr, result.est_corr) : 0.0;
    std::ofstream rec(dir / "recovery.csv");
    rec << "group,rmse,mae\n";
    rec << "coefficients," << csv::FormatDouble(result.coefficient_error.rmse) << ','
        << csv::FormatDouble(result.coefficient_error.mae) << '\n';
    rec << "variances," << csv::FormatDouble(result.variance_error.rmse) << ','
        << csv::FormatDouble(result.variance_error.mae) << '\n';
    rec << "correlations," << csv::FormatDouble(result.correlation_error.rmse) << ','
        << csv::FormatDouble(result.correlation_error.mae) << '\n';
    WriteScatter(dir / "scatter_coefficients.csv", result.true_coef, result.est_coef);
    WriteScatter(dir / "scatter_variances.csv", result.true_var, result.est_var);
    WriteScatter(dir / "scatter_correlations.csv", result.true_corr, result.est_corr);
  }

  if (command.run_sensitivity) {
    SensitivityResult s = BaseSensitivityRun(data, sens, progress);
    std::ofstream curves(dir / "curves.csv");
    curves << "base,prior,category,grid_index,price,probability\n";
    for (const auto& p : s.curves) {
      curves << p.base << ',' << p.prior << ',' << p.category << ',' << p.grid_index << ','
             << csv::FormatDouble(p.price) << ',' << csv::FormatDouble(p.probability) << '\n';
    }
    std::ofstream sd(dir / "sensitivity.csv");
    sd << "prior,mu_gamma,sup_distance\n";
    sd << "identity,0," << csv::FormatDouble(s.identity_sup_distance) << '\n';
    sd << "equicorrelated," << csv::FormatDouble(s.mu_star) << ',' << csv::FormatDouble(s.equicorrelated_sup_distance)
       << '\n';
    summary.sensitivity = std::move(s);
  }
  manifest.Set("status", "complete");
  manifest.Write(dir / "manifest.txt");
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate

std::vector<Comparison> CompareToReference(const std::vector<ScoredRun>& runs) {
  Require(!runs.empty(), "no runs to compare");
  const ScoredRun& ref = runs.front();
  std::vector<Comparison> out;
  auto mean_of = [](const auto& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (const auto& run : runs) {
    for (const std::string sample : {"in", "out"}) {
      const bool in = sample == "in";
      const auto& hits = in ? run.hits_in : run.hits_out;
      const auto& logs = in ? run.log_in : run.log_out;
      const auto& ref_hits = in ? ref.hits_in : ref.hits_out;
      const auto& ref_logs = in ? ref.log_in : ref.log_out;
      if (hits.empty()) continue;
      if (hits.size() != ref_hits.size()) {
        Fail(ErrorCode::kMismatch, "run '" + run.label + "' has a different number of " + sample +
                                       "-sample observations than '" + ref.label + "'");
      }
      Comparison hit{run.label, sample, "hit_rate", mean_of(hits), CompareHitRates(ref_hits, hits), ""};
      Comparison log{run.label, sample, "log_score", mean_of(logs), CompareLogScores(ref_logs, logs), ""};
      for (Comparison* c : {&hit, &log}) {
        if (c->test.p_value < kSignificanceLevel) c->mark = c->test.statistic > 0 ? "+" : "-";
      }
      out.push_back(hit);
      out.push_back(log);
    }
  }
  return out;
}

namespace {

struct LoadedRun {
  fs::path dir;
  Manifest manifest;
  std::vector<long long> train_ids, test_ids;
};

// Rebuilds the standardized train and test data a run was fitted on.
std::pair<ChoiceDataset, ChoiceDataset> RebuildSplitData(const LoadedRun& run) {
  const Manifest& m = run.manifest;
  std::optional<fs::path> indiv;
  if (auto v = m.Get("indiv")) indiv = *v;
  const bool intercept = m.Get("intercept").value_or("true") == "true";
  ChoiceDataset data = LoadChoiceCsv(m.Require("data"), indiv, intercept);
  if (auto b = m.Get("base")) data = RelabelBaseCategory(data, InternalIndexOfLabel(data, static_cast<int>(csv::ParseInt(*b, "base"))));
  const ScalingRecord scaling = ReadScaling(run.dir / "scaling.csv");
  return {ApplyScaling(SubsetObservations(data, IndicesOf(data, run.train_ids)), scaling),
          ApplyScaling(SubsetObservations(data, IndicesOf(data, run.test_ids)), scaling)};
}

}  // namespace

std::vector<Comparison> RunEvaluate(const EvaluateCommand& command, const ProgressFn& progress) {
  Require(!command.runs.empty(), "at least one run directory is required");
  Require(!command.output.empty(), "an output directory is required");
  std::vector<LoadedRun> runs;
  for (const auto& dir : command.runs) {
    LoadedRun r;
    r.dir = dir;
    r.manifest = Manifest::Read(dir / "manifest.txt");
    std::tie(r.train_ids, r.test_ids) = ReadSplit(dir / "split.csv");
    if (!runs.empty() && (r.train_ids != runs.front().train_ids || r.test_ids != runs.front().test_ids)) {
      Fail(ErrorCode::kMismatch, "split of run '" + dir.string() + "' differs from that of '" +
                                     runs.front().dir.string() + "'");
    }
    runs.push_back(std::move(r));
  }

  std::vector<ScoredRun> scored;
  std::vector<std::string> used_labels;
  for (const auto& run : runs) {
    ScoredRun s;
    s.label = run.dir.filename().string();
    if (s.label.empty()) s.label = run.dir.parent_path().filename().string();
    if (std::find(used_labels.begin(), used_labels.end(), s.label) != used_labels.end()) {
      s.label += "#" + std::to_string(scored.size() + 1);
    }
    used_labels.push_back(s.label);
    for (const std::string sample : {"in", "out"}) {
      const fs::path file = run.dir / ("pmf_" + sample + ".csv");
      const auto& ids = sample == "in" ? run.train_ids : run.test_ids;
      if (ids.empty()) continue;
      PredictivePmf pmf;
      std::vector<int> truths;
      if (fs::exists(file)) {
        std::tie(pmf, truths) = ReadPmf(file);
      } else {
        Note(progress, "recomputing " + file.string());
        auto [train, test] = RebuildSplitData(run);
        const ChoiceDataset& part = sample == "in" ? train : test;
        if (run.manifest.Get("variant").value_or("") == kNaiveVariant) {
          pmf = NaiveForecast(train.choices, train.num_alternatives, part.N());
        } else {
          pmf = PredictivePmfFromDraws(part, ReadDraws(run.dir), command.fit.replicates,
                                       command.fit.pmf_seed + (sample == "in" ? 0 : 1), command.fit.threads,
                                       command.fit.pmf_max_draws);
        }
        WritePmf(part, pmf, file);
        truths = part.choices;
      }
      if (truths.size() != ids.size()) {
        Fail(ErrorCode::kMismatch, file.string() + " does not match the run's split");
      }
      auto& hits = sample == "in" ? s.hits_in : s.hits_out;
      auto& logs = sample == "in" ? s.log_in : s.log_out;
      hits = HitIndicators(pmf, truths);
      logs = LogProbabilities(pmf, truths);
    }
    scored.push_back(std::move(s));
  }

  const std::vector<Comparison> comparisons = CompareToReference(scored);
  fs::create_directories(command.output);
  WriteMetricsCsv(RowsWithPValues(comparisons), command.output / "comparison.csv");
  {
    std::ofstream p(command.output / "pvalues.csv");
    if (!p) Fail(ErrorCode::kIo, "cannot write " + (command.output / "pvalues.csv").string());
    p << "model,reference,sample,metric,statistic,p_value,degenerate_variance,mark\n";
    for (const auto& c : comparisons) {
      p << c.model << ',' << scored.front().label << ',' << c.sample << ',' << c.metric << ','
        << csv::FormatDouble(c.test.statistic) << ',' << csv::FormatDouble(c.test.p_value) << ','
        << (c.test.degenerate_variance ? "true" : "false") << ',' << c.mark << '\n';
    }
  }
  {
    // One row per model; columns in-sample hit, log, out-of-sample hit, log.
    std::ofstream t(command.output / "comparison.txt");
    t << "reference: " << scored.front().label << "\n";
    t << "(+) reference significantly better, (-) significantly worse, at the 5% level\n\n";
    t << std::left << std::setw(14) << "model" << std::right << std::setw(12) << "hit_in" << std::setw(12) << "log_in"
      << std::setw(12) << "hit_out" << std::setw(12) << "log_out" << '\n';
    for (const auto& s : scored) {
      t << std::left << std::setw(14) << s.label << std::right;
      for (const std::string sample : {"in", "out"}) {
        for (const std::string metric : {"hit_rate", "log_score"}) {
          std::string cell = "-";
          for (const auto& c : comparisons) {
            if (c.model == s.label && c.sample == sample && c.metric == metric) {
              std::ostringstream v;
              v << std::fixed << std::setprecision(4) << c.value;
              cell = v.str() + (c.mark.empty() ? "" : "(" + c.mark + ")");
            }
          }
          t << std::setw(12) << cell;
        }
      }
      t << '\n';
    }
  }
  return comparisons;
}

}  // namespace mnpfs
