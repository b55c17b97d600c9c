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

#ifndef MNPFS_PIPELINE_HPP_
#define MNPFS_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mnpfs/evaluation.hpp"
#include "mnpfs/experiment.hpp"
#include "mnpfs/io.hpp"
#include "mnpfs/prior.hpp"
#include "mnpfs/sampler.hpp"

namespace mnpfs {

// Subcommand implementations shared by the C API and the command line.
// Each one writes its manifest before any other output.

struct CalibrateCommand {
  std::size_t J = 0;
  std::size_t q = 1;
  // Unset solves for the loading mean that makes the prior mean of Sigma
  // equicorrelated.
  std::optional<double> mu_gamma = 0.0;
  double sigma_gamma = 1.0;
  double nu = 5.0;
  std::size_t M = 100000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t solver_draws = 100000;
  std::filesystem::path output;
  // Defaults to <output>.diagnostics.csv.
  std::filesystem::path diagnostics;
};

CalibratedPrior RunCalibrate(const CalibrateCommand& command, const ProgressFn& progress = {});

struct FitCommand {
  std::filesystem::path data;
  std::optional<std::filesystem::path> indiv;
  bool include_intercept = true;
  std::string variant = "mnp-fs";
  std::filesystem::path prior;
  std::filesystem::path run_dir;
  std::optional<int> base;  // alternative id used as the base category
  SamplerConfig sampler;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 2;
  FitOptions fit;
};

// Returns in- and out-of-sample reports.
std::vector<MetricReport> RunFit(const FitCommand& command, const ProgressFn& progress = {});

struct SimulateCommand {
  DgpConfig dgp;
  std::filesystem::path output;
  // Truth files go next to `output` when empty.
  std::filesystem::path truth_prefix;
};

void RunSimulate(const SimulateCommand& command);

ExperimentConfig DeskScaleExperiment();
ExperimentConfig PaperScaleExperiment();

// Applies dgp.*, sampler.*, prior.*, eval.* and sensitivity.* keys.
// Unknown keys throw kInvalidArgument.
void ApplyExperimentManifest(const Manifest& manifest, ExperimentConfig& config, SensitivityConfig& sensitivity);

struct ExperimentCommand {
  ExperimentConfig config = DeskScaleExperiment();
  SensitivityConfig sensitivity;
  bool run_sensitivity = false;
  std::filesystem::path run_dir;
};

struct ExperimentSummary {
  std::vector<MetricReport> metrics;
  bool has_recovery = false;
  RecoveryError coefficient_error, variance_error, correlation_error;
  double correlation_pearson = 0.0;
  std::optional<SensitivityResult> sensitivity;
};

ExperimentSummary RunExperiment(const ExperimentCommand& command, const ProgressFn& progress = {});

struct EvaluateCommand {
  std::vector<std::filesystem::path> runs;
  std::filesystem::path output;
  FitOptions fit;
};

// Per-observation outcomes of one run.
struct ScoredRun {
  std::string label;
  std::vector<int> hits_in, hits_out;
  std::vector<double> log_in, log_out;
};

struct Comparison {
  std::string model;
  std::string sample;  // "in" or "out"
  std::string metric;  // "hit_rate" or "log_score"
  double value = 0.0;
  TestResult test;     // against the first run
  std::string mark;    // "+" reference significantly better, "-" worse
};

inline constexpr double kSignificanceLevel = 0.05;

std::vector<Comparison> CompareToReference(const std::vector<ScoredRun>& runs);

std::vector<Comparison> RunEvaluate(const EvaluateCommand& command, const ProgressFn& progress = {});

}  // namespace mnpfs

#endif  // MNPFS_PIPELINE_HPP_
