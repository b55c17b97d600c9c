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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mnpfs/error.hpp"
#include "mnpfs/io.hpp"
#include "mnpfs/pipeline.hpp"

using namespace mnpfs;
namespace fs = std::filesystem;

namespace {

fs::path Scratch(const std::string& name) {
  const char* root = std::getenv("MNPFS_TEST_TMP");
  const fs::path dir = (root ? fs::path(root) : fs::temp_directory_path()) / ("pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SamplerConfig Short(std::size_t iterations, std::size_t burn_in) {
  SamplerConfig s;
  s.total_iterations = iterations;
  s.burn_in = burn_in;
  s.seed = 9;
  return s;
}

// Simulated data plus a calibrated q = 1 prior, shared by the fit tests.
struct Workspace {
  fs::path dir;
  fs::path data;
  fs::path prior;
};

const Workspace& SharedWorkspace() {
  static const Workspace ws = [] {
    Workspace w;
    w.dir = Scratch("shared");
    w.data = w.dir / "sim.csv";
    SimulateCommand sim;
    sim.dgp.num_alternatives = 3;
    sim.dgp.N = 120;
    sim.dgp.seed = 4;
    sim.output = w.data;
    RunSimulate(sim);
    CalibrateCommand cal;
    cal.J = 2;
    cal.M = 5000;
    cal.seed = 3;
    cal.output = w.dir / "prior.txt";
    RunCalibrate(cal);
    w.prior = cal.output;
    return w;
  }();
  return ws;
}

}  // namespace

TEST_CASE("manifest set get and round trip") {
  Manifest m;
  m.Set("name", "value");
  m.Set("count", 12);
  m.Set("ratio", 0.25);
  m.Set("flag", true);
  m.Set("name", "other");
  CHECK(m.entries().size() == 4);
  CHECK(m.Get("name") == std::optional<std::string>("other"));
  CHECK(m.Require("count") == "12");
  CHECK(m.Require("flag") == "true");
  CHECK(std::stod(m.Require("ratio")) == 0.25);
  CHECK_FALSE(m.Has("missing"));
  CHECK_FALSE(m.Get("missing").has_value());
  CHECK_THROWS_AS(m.Require("missing"), Error);

  const fs::path dir = Scratch("manifest");
  m.Write(dir / "m.txt");
  const Manifest back = Manifest::Read(dir / "m.txt");
  CHECK(back.entries() == m.entries());

  {
    std::ofstream out(dir / "c.txt");
    out << "# comment\n\n  spaced.key =  spaced value  \nempty =\n";
  }
  const Manifest c = Manifest::Read(dir / "c.txt");
  CHECK(c.Require("spaced.key") == "spaced value");
  CHECK(c.Require("empty").empty());
  {
    std::ofstream out(dir / "bad.txt");
    out << "no equals sign here\n";
  }
  CHECK_THROWS_AS(Manifest::Read(dir / "bad.txt"), Error);
  CHECK_THROWS_AS(Manifest::Read(dir / "absent.txt"), Error);
}

TEST_CASE("draws round trip") {
  const auto& ws = SharedWorkspace();
  const ChoiceDataset data = StandardizeCovariates(LoadChoiceCsv(ws.data)).first;
  const CalibratedPrior prior = LoadPrior(ws.prior);
  const PosteriorDraws draws = RunChain(data, Short(60, 20), &prior);
  const fs::path dir = Scratch("draws");
  WriteDrawTables(draws, dir);
  WriteDrawMeta(draws, dir);
  const PosteriorDraws back = ReadDraws(dir);
  CHECK(back.variant == draws.variant);
  CHECK(back.J == draws.J);
  CHECK(back.q == draws.q);
  CHECK(back.beta == draws.beta);
  CHECK(back.kappa == draws.kappa);
  CHECK(back.acceptance_rate == draws.acceptance_rate);
  CHECK(back.config.total_iterations == 60);
  CHECK(back.config.burn_in == 20);
  CHECK(back.config.seed == 9);

  SamplerConfig identity = Short(30, 10);
  identity.variant = ModelVariant::kIdentity;
  const PosteriorDraws plain = RunChain(data, identity, nullptr);
  const fs::path dir2 = Scratch("draws_identity");
  WriteDrawTables(plain, dir2);
  WriteDrawMeta(plain, dir2);
  const PosteriorDraws plain_back = ReadDraws(dir2);
  CHECK(plain_back.variant == ModelVariant::kIdentity);
  CHECK(plain_back.beta == plain.beta);
  CHECK(plain_back.kappa.cols() == 0);
}

TEST_CASE("split scaling and pmf round trips") {
  const auto& ws = SharedWorkspace();
  const ChoiceDataset data = LoadChoiceCsv(ws.data);
  const fs::path dir = Scratch("tables");

  const Split split = TrainTestSplit(data.N(), 0.75, 8);
  WriteSplit(data, split, dir / "split.csv");
  const auto [train_ids, test_ids] = ReadSplit(dir / "split.csv");
  REQUIRE(train_ids.size() == split.train.size());
  REQUIRE(test_ids.size() == split.test.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) CHECK(train_ids[i] == data.obs_ids[split.train[i]]);
  for (std::size_t i = 0; i < split.test.size(); ++i) CHECK(test_ids[i] == data.obs_ids[split.test[i]]);

  const ScalingRecord scaling = StandardizeCovariates(data).second;
  WriteScaling(scaling, dir / "scaling.csv");
  const ScalingRecord s2 = ReadScaling(dir / "scaling.csv");
  CHECK(s2.alt_mean == scaling.alt_mean);
  CHECK(s2.alt_sd == scaling.alt_sd);
  CHECK(s2.indiv_mean.size() == 0);

  PredictivePmf pmf;
  pmf.probs = Matrix::Constant(static_cast<Eigen::Index>(data.N()), 3, 1.0 / 3.0);
  pmf.probs(0, 0) = 0.1;
  pmf.probs(0, 1) = 0.7;
  pmf.probs(0, 2) = 0.2;
  WritePmf(data, pmf, dir / "pmf.csv");
  const auto [p2, choices] = ReadPmf(dir / "pmf.csv");
  CHECK(p2.probs == pmf.probs);
  CHECK(choices == data.choices);
}

TEST_CASE("metric rows and table") {
  MetricReport r{"mnp-fs", "out", 0.5, -1.25};
  const auto rows = MetricRows(r);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].hit_rate == 0.5);
  CHECK_FALSE(rows[0].log_score.has_value());
  CHECK(rows[1].log_score == -1.25);
  CHECK_FALSE(rows[1].p_vs_reference.has_value());

  const fs::path dir = Scratch("metrics");
  WriteMetricsCsv(rows, dir / "metrics.csv");
  const std::string text = Slurp(dir / "metrics.csv");
  CHECK(text.find("mnp-fs") != std::string::npos);
  const std::string table = FormatMetricTable({r, MetricReport{"naive", "out", 0.25, -2.0}});
  CHECK(table.find("naive") != std::string::npos);
  CHECK(table.find("mnp-fs") != std::string::npos);
}

TEST_CASE("simulate writes data and truth") {
  const fs::path dir = Scratch("simulate");
  SimulateCommand sim;
  sim.dgp.num_alternatives = 4;
  sim.dgp.N = 30;
  sim.output = dir / "sub" / "d.csv";
  RunSimulate(sim);
  CHECK(fs::exists(dir / "sub" / "d.csv"));
  CHECK(fs::exists(dir / "sub" / "d_truth_beta.csv"));
  CHECK(fs::exists(dir / "sub" / "d_truth_sigma.csv"));
  const ChoiceDataset d = LoadChoiceCsv(dir / "sub" / "d.csv");
  CHECK(d.N() == 30);
  CHECK(d.num_alternatives == 4);
  const ChoiceDataset direct = SimulateDataset(sim.dgp).data;
  CHECK(d.choices == direct.choices);
}

TEST_CASE("calibrate is deterministic and validates input") {
  const fs::path dir = Scratch("calibrate");
  CalibrateCommand cal;
  cal.J = 2;
  cal.M = 4000;
  cal.seed = 5;
  cal.output = dir / "a.txt";
  const CalibratedPrior a = RunCalibrate(cal);
  cal.output = dir / "b.txt";
  RunCalibrate(cal);
  CHECK(Slurp(dir / "a.txt") == Slurp(dir / "b.txt"));
  CHECK(fs::exists(dir / "a.txt.diagnostics.csv"));
  CHECK(a.margins.size() == 3);
  CHECK(LoadPrior(dir / "a.txt").margins.size() == 3);

  cal.J = 0;
  CHECK_THROWS_AS(RunCalibrate(cal), Error);
  cal.J = 2;
  cal.nu = -1.0;
  CHECK_THROWS_AS(RunCalibrate(cal), Error);
  cal.nu = 5.0;
  cal.output.clear();
  CHECK_THROWS_AS(RunCalibrate(cal), Error);
}

TEST_CASE("fit writes a complete run directory") {
  const auto& ws = SharedWorkspace();
  FitCommand fit;
  fit.data = ws.data;
  fit.prior = ws.prior;
  fit.run_dir = Scratch("fit_fs");
  fit.sampler = Short(80, 40);
  fit.fit.pmf_max_draws = 20;
  const auto reports = RunFit(fit);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].sample == "in");
  CHECK(reports[1].sample == "out");
  for (const char* f : {"manifest.txt", "split.csv", "scaling.csv", "beta.csv", "kappa.csv", "draws_meta.txt",
                        "pmf_in.csv", "pmf_out.csv", "metrics.csv", "metrics.txt", "acceptance.csv"}) {
    CHECK_MESSAGE(fs::exists(fit.run_dir / f), f);
  }
  const Manifest m = Manifest::Read(fit.run_dir / "manifest.txt");
  CHECK(m.Require("status") == "complete");
  CHECK(m.Require("variant") == "mnp-fs");
  CHECK(ReadDraws(fit.run_dir).beta.rows() == 40);

  FitCommand naive = fit;
  naive.variant = "naive";
  naive.prior.clear();
  naive.run_dir = Scratch("fit_naive");
  const auto nr = RunFit(naive);
  CHECK(nr.size() == 2);
  CHECK(fs::exists(naive.run_dir / "pmf_out.csv"));
  CHECK_FALSE(fs::exists(naive.run_dir / "beta.csv"));
}

TEST_CASE("fit writes its manifest before failing") {
  const auto& ws = SharedWorkspace();
  const fs::path dir = Scratch("fit_mismatch");
  CalibrateCommand cal;
  cal.J = 3;
  cal.M = 3000;
  cal.output = dir / "prior_j3.txt";
  RunCalibrate(cal);

  FitCommand fit;
  fit.data = ws.data;
  fit.prior = cal.output;
  fit.run_dir = dir / "run";
  fit.sampler = Short(20, 10);
  try {
    RunFit(fit);
    FAIL("expected a mismatch error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMismatch);
  }
  const Manifest m = Manifest::Read(fit.run_dir / "manifest.txt");
  CHECK(m.Require("status") == "running");
  CHECK(m.Require("command") == "fit");

  fit.prior = dir / "absent.txt";
  CHECK_THROWS_AS(RunFit(fit), Error);
  fit.prior = ws.prior;
  fit.variant = "probit";
  CHECK_THROWS_AS(RunFit(fit), Error);
}

TEST_CASE("fit with a relabeled base category") {
  const auto& ws = SharedWorkspace();
  FitCommand fit;
  fit.data = ws.data;
  fit.variant = "mnp-i";
  fit.base = 2;
  fit.run_dir = Scratch("fit_base");
  fit.sampler = Short(40, 20);
  fit.fit.pmf_max_draws = 10;
  RunFit(fit);
  CHECK(Manifest::Read(fit.run_dir / "manifest.txt").Require("base") == "2");
  fit.base = 9;
  fit.run_dir = Scratch("fit_bad_base");
  CHECK_THROWS_AS(RunFit(fit), Error);
}

TEST_CASE("evaluate compares runs against the first") {
  const auto& ws = SharedWorkspace();
  FitCommand a;
  a.data = ws.data;
  a.variant = "mnp-i";
  a.run_dir = Scratch("eval_a");
  a.sampler = Short(60, 30);
  a.fit.pmf_max_draws = 15;
  RunFit(a);
  FitCommand b = a;
  b.variant = "naive";
  b.run_dir = Scratch("eval_b");
  RunFit(b);

  EvaluateCommand self;
  self.runs = {a.run_dir, a.run_dir};
  self.output = Scratch("eval_self");
  const auto same = RunEvaluate(self);
  REQUIRE(same.size() == 8);
  for (const auto& c : same) {
    CHECK(c.test.p_value == 1.0);
    CHECK(c.mark.empty());
  }
  CHECK(fs::exists(self.output / "comparison.csv"));
  CHECK(fs::exists(self.output / "pvalues.csv"));
  CHECK(fs::exists(self.output / "comparison.txt"));

  EvaluateCommand pair;
  pair.runs = {a.run_dir, b.run_dir};
  pair.output = Scratch("eval_pair");
  const auto diff = RunEvaluate(pair);
  CHECK(diff.size() == 8);

  EvaluateCommand none;
  none.output = Scratch("eval_none");
  CHECK_THROWS_AS(RunEvaluate(none), Error);
}

TEST_CASE("reference comparison") {
  ScoredRun ref{"ref", {1, 1, 0, 1}, {1, 0, 1, 1, 1, 1}, {-0.5, -0.6, -1.0, -0.4}, {-0.3, -2.0, -0.4, -0.2, -0.3, -0.5}};
  ScoredRun worse{"worse", {0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}, {-2.0, -2.1, -2.5, -2.2},
                  {-3.0, -3.1, -2.9, -3.3, -3.2, -3.05}};
  const auto out = CompareToReference({ref, worse});
  REQUIRE(out.size() == 8);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(out[i].test.p_value == 1.0);
    CHECK(out[i].mark.empty());
  }
  const Comparison& log_out = out[7];
  CHECK(log_out.model == "worse");
  CHECK(log_out.sample == "out");
  CHECK(log_out.metric == "log_score");
  CHECK(log_out.mark == "+");
  CHECK(log_out.test.p_value < 0.05);
  CHECK(out[6].metric == "hit_rate");
  CHECK(out[6].mark == "+");

  ScoredRun short_run{"short", {1}, {}, {-1.0}, {}};
  CHECK_THROWS_AS(CompareToReference({ref, short_run}), Error);
  CHECK_THROWS_AS(CompareToReference({}), Error);
}

TEST_CASE("experiment manifest keys") {
  ExperimentConfig config = DeskScaleExperiment();
  CHECK(config.dgp.num_alternatives == 10);
  CHECK(config.dgp.N == 2000);
  CHECK(config.sampler.total_iterations == 20000);
  const ExperimentConfig paper = PaperScaleExperiment();
  CHECK(paper.dgp.num_alternatives == 50);
  CHECK(paper.dgp.N == 5000);
  CHECK(paper.sampler.total_iterations == 200000);
  CHECK(paper.sampler.burn_in == 100000);

  SensitivityConfig sens;
  Manifest m;
  m.Set("dgp.N", 77);
  m.Set("dgp.seed", 5);
  m.Set("sampler.total_iterations", 90);
  m.Set("sampler.burn_in", 30);
  m.Set("prior.M", 1234);
  m.Set("eval.variants", "mnp-i,naive");
  m.Set("sensitivity.grid_points", 3);
  m.Set("sensitivity.bases", "1,2");
  ApplyExperimentManifest(m, config, sens);
  CHECK(config.dgp.N == 77);
  CHECK(config.dgp.seed == 5);
  CHECK(config.sampler.total_iterations == 90);
  CHECK(config.calibration.M == 1234);
  CHECK(config.variants == std::vector<std::string>{"mnp-i", "naive"});
  CHECK(sens.grid_points == 3);
  CHECK(sens.bases == std::vector<int>{1, 2});

  Manifest bad;
  bad.Set("dgp.colour", "blue");
  CHECK_THROWS_AS(ApplyExperimentManifest(bad, config, sens), Error);
  Manifest bad_value;
  bad_value.Set("dgp.N", "many");
  CHECK_THROWS_AS(ApplyExperimentManifest(bad_value, config, sens), Error);
}

TEST_CASE("experiment run directory") {
  ExperimentCommand cmd;
  cmd.config.dgp.num_alternatives = 3;
  cmd.config.dgp.N = 100;
  cmd.config.sampler = Short(120, 60);
  cmd.config.calibration.M = 4000;
  cmd.config.calibration.restarts = 1;
  cmd.config.fit.pmf_max_draws = 15;
  cmd.run_dir = Scratch("experiment");
  const auto summary = RunExperiment(cmd);
  CHECK(summary.metrics.size() == 6);
  CHECK(summary.has_recovery);
  CHECK_FALSE(summary.sensitivity.has_value());
  for (const char* f : {"manifest.txt", "dataset.csv", "truth_beta.csv", "truth_sigma.csv", "split.csv", "scaling.csv",
                        "metrics.csv", "metrics.txt", "recovery.csv", "scatter_coefficients.csv",
                        "scatter_variances.csv", "scatter_correlations.csv"}) {
    CHECK_MESSAGE(fs::exists(cmd.run_dir / f), f);
  }
  for (const char* v : {"mnp-fs", "mnp-i", "naive"}) {
    CHECK(fs::exists(cmd.run_dir / v / "manifest.txt"));
    CHECK(fs::exists(cmd.run_dir / v / "pmf_in.csv"));
  }
  CHECK(Manifest::Read(cmd.run_dir / "manifest.txt").Require("status") == "complete");

  // Variant directories can be compared afterwards.
  EvaluateCommand eval;
  eval.runs = {cmd.run_dir / "mnp-fs", cmd.run_dir / "naive"};
  eval.output = Scratch("experiment_eval");
  eval.fit.pmf_max_draws = 15;
  CHECK(RunEvaluate(eval).size() == 8);
}
