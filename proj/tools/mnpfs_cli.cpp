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

// Command-line front end over the C API.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mnpfs/mnpfs.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string RunRoot() {
  const char* env = std::getenv("MNPFS_RUN_ROOT");
  return (env != nullptr && *env != '\0') ? std::string(env) : std::string("runs");
}

void PrintProgress(const char* message, void*) { std::cerr << "[mnpfs] " << message << '\n'; }

int Report(mnpfs_status status) {
  if (status == MNPFS_OK) return kExitOk;
  std::cerr << "error: " << mnpfs_last_error() << '\n';
  return status == MNPFS_ERR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
}

std::size_t DefaultThreads() { return std::max(1u, std::thread::hardware_concurrency()); }

struct CalibrateFlags {
  mnpfs_calibrate_options options{};
  std::string mu_gamma = "0";
  std::string output;
  std::string diagnostics;
};

struct FitFlags {
  mnpfs_fit_options options{};
  std::string data, indiv, variant = "mnp-fs", prior, run_dir;
  bool no_intercept = false;
  int base = 0;
};

struct SimulateFlags {
  mnpfs_dgp_options options{};
  std::string output, truth_prefix;
};

struct ExperimentFlags {
  std::string run_dir, manifest;
  std::vector<std::string> settings;
  bool paper_scale = false;
  bool sensitivity = false;
  std::size_t alternatives = 0, N = 0, iterations = 0, burn_in = 0;
  std::uint64_t seed = 0;
};

struct EvaluateFlags {
  mnpfs_evaluate_options options{};
  std::vector<std::string> runs;
  std::string output;
};

void AddSamplerFlags(CLI::App* cmd, mnpfs_sampler_options& s) {
  cmd->add_option("--iterations", s.total_iterations, "Total MCMC iterations")->capture_default_str();
  cmd->add_option("--burn-in", s.burn_in, "Discarded initial iterations")->capture_default_str();
  cmd->add_option("--thinning", s.thinning, "Keep every n-th post burn-in draw")->capture_default_str();
  cmd->add_option("--beta-prior-variance", s.beta_prior_variance, "Prior variance of each coefficient")
      ->capture_default_str();
  cmd->add_option("--block-size", s.block_size, "Angles per Metropolis-Hastings block")->capture_default_str();
  cmd->add_option("--adaptation-batch", s.adaptation_batch, "Iterations between proposal adaptations")
      ->capture_default_str();
  cmd->add_option("--initial-proposal-sd", s.initial_proposal_sd, "Initial proposal scale per angle")
      ->capture_default_str();
  cmd->add_option("--seed", s.seed, "Sampler seed")->capture_default_str();
  cmd->add_option("--q", s.q, "Number of factors")->capture_default_str();
}

void AddEvalFlags(CLI::App* cmd, mnpfs_eval_options& e) {
  cmd->add_option("--replicates", e.replicates, "Utility replicates per posterior draw")->capture_default_str();
  cmd->add_option("--pmf-max-draws", e.pmf_max_draws, "Posterior draws used for probabilities (0 = all)")
      ->capture_default_str();
  cmd->add_option("--pmf-seed", e.pmf_seed, "Seed for predictive simulation")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian multinomial probit with a trace-restricted factor covariance"};
  app.set_version_flag("--version", std::string(mnpfs_version()));
  app.set_config("--config", "", "INI/TOML file with flag values; flags on the command line take precedence");
  app.require_subcommand(1);
  app.footer("Precedence: command-line flags > --config file > built-in defaults.\n"
             "Runs are written under $MNPFS_RUN_ROOT (default ./runs) unless a path is given.\n"
             "Exit codes: 0 success, 1 runtime or sampler failure, 2 usage or configuration error.");
  std::size_t threads = DefaultThreads();
  app.add_option("--threads", threads, "Worker threads")->capture_default_str();

  // calibrate
  CalibrateFlags cal;
  mnpfs_calibrate_options_init(&cal.options);
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the angle prior for given J, q and theta");
  calibrate->add_option("--J", cal.options.J, "Number of differenced utilities (alternatives - 1)")->required();
  calibrate->add_option("--q", cal.options.q, "Number of factors")->capture_default_str();
  calibrate->add_option("--mu-gamma", cal.mu_gamma, "Prior mean of the loadings, or 'equicorrelated'")
      ->capture_default_str();
  calibrate->add_option("--sigma-gamma", cal.options.sigma_gamma, "Prior sd of the loadings")->capture_default_str();
  calibrate->add_option("--nu", cal.options.nu, "Inverse-Gamma shape of the idiosyncratic variances")
      ->capture_default_str();
  calibrate->add_option("--M", cal.options.M, "Calibration draws")->capture_default_str();
  calibrate->add_option("--seed", cal.options.seed, "Calibration seed")->capture_default_str();
  calibrate->add_option("--solver-draws", cal.options.solver_draws, "Draws for the equicorrelated solver")
      ->capture_default_str();
  calibrate->add_option("--output", cal.output, "Prior file (default $MNPFS_RUN_ROOT/prior_J<J>_q<q>.txt)");
  calibrate->add_option("--diagnostics", cal.diagnostics, "Diagnostics CSV (default <output>.diagnostics.csv)");

  // fit
  FitFlags fit;
  mnpfs_fit_options_init(&fit.options);
  auto* fit_cmd = app.add_subcommand("fit", "Run the sampler on a choice CSV and score it on a train/test split");
  fit_cmd->add_option("--data", fit.data, "Long-format choice CSV")->required();
  fit_cmd->add_option("--indiv", fit.indiv, "Individual covariates CSV");
  fit_cmd->add_flag("--no-intercept", fit.no_intercept, "Drop alternative intercepts");
  fit_cmd->add_option("--variant", fit.variant, "mnp-fs, mnp-i or naive")->capture_default_str();
  fit_cmd->add_option("--prior", fit.prior, "Calibrated prior file (mnp-fs)");
  fit_cmd->add_option("--run-dir", fit.run_dir, "Output directory (default $MNPFS_RUN_ROOT/fit-<variant>)");
  auto* base_opt = fit_cmd->add_option("--base", fit.base, "Alternative id to use as base category");
  fit_cmd->add_option("--train-fraction", fit.options.train_fraction, "Share of observations for training")
      ->capture_default_str();
  fit_cmd->add_option("--split-seed", fit.options.split_seed, "Train/test split seed")->capture_default_str();
  AddSamplerFlags(fit_cmd, fit.options.sampler);
  AddEvalFlags(fit_cmd, fit.options.eval);

  // simulate
  SimulateFlags sim;
  mnpfs_dgp_options_init(&sim.options);
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic choice dataset and its true parameters");
  simulate->add_option("--alternatives", sim.options.num_alternatives, "Number of alternatives (J + 1)")
      ->capture_default_str();
  simulate->add_option("--N", sim.options.num_observations, "Number of observations")->capture_default_str();
  simulate->add_option("--intercept-variance", sim.options.intercept_variance, "Variance of the true intercepts")
      ->capture_default_str();
  simulate->add_option("--price-coefficient", sim.options.price_coefficient, "True price coefficient")
      ->capture_default_str();
  simulate->add_option("--iw-off-diagonal", sim.options.iw_off_diagonal, "Off-diagonal of the Inverse-Wishart scale")
      ->capture_default_str();
  simulate->add_option("--seed", sim.options.seed, "Simulation seed")->capture_default_str();
  simulate->add_option("--output", sim.output, "Choice CSV to write")->required();
  simulate->add_option("--truth-prefix", sim.truth_prefix, "Prefix for <prefix>_truth_beta.csv / _truth_sigma.csv");

  // experiment
  ExperimentFlags exp;
  auto* experiment = app.add_subcommand("experiment", "Simulate, calibrate, fit and evaluate in one run directory");
  experiment->add_option("--run-dir", exp.run_dir, "Output directory (default $MNPFS_RUN_ROOT/experiment)");
  experiment->add_option("--manifest", exp.manifest, "key = value file with dgp.*, sampler.*, prior.*, eval.* keys");
  experiment->add_option("--set", exp.settings, "Extra key=value setting (repeatable, applied last)");
  experiment->add_flag("--paper-scale", exp.paper_scale, "Start from J+1 = 50, N = 5000, 200,000 iterations");
  experiment->add_flag("--sensitivity", exp.sensitivity, "Also run the base-category sensitivity comparison");
  auto* exp_alt = experiment->add_option("--alternatives", exp.alternatives, "Overrides dgp.num_alternatives");
  auto* exp_n = experiment->add_option("--N", exp.N, "Overrides dgp.N");
  auto* exp_iter = experiment->add_option("--iterations", exp.iterations, "Overrides sampler.total_iterations");
  auto* exp_burn = experiment->add_option("--burn-in", exp.burn_in, "Overrides sampler.burn_in");
  auto* exp_seed = experiment->add_option("--seed", exp.seed, "Overrides dgp.seed and sampler.seed");

  // evaluate
  EvaluateFlags ev;
  mnpfs_evaluate_options_init(&ev.options);
  auto* evaluate = app.add_subcommand("evaluate", "Compare run directories; the first run is the reference");
  evaluate->add_option("--runs", ev.runs, "Two or more run directories")->required()->expected(2, -1);
  evaluate->add_option("--output", ev.output, "Output directory (default $MNPFS_RUN_ROOT/evaluation)");
  AddEvalFlags(evaluate, ev.options.eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  threads = std::max<std::size_t>(1, threads);
  const std::string root = RunRoot();

  if (calibrate->parsed()) {
    cal.options.threads = threads;
    if (cal.mu_gamma == "equicorrelated") {
      cal.options.solve_mu_gamma = 1;
    } else {
      try {
        std::size_t used = 0;
        cal.options.mu_gamma = std::stod(cal.mu_gamma, &used);
        if (used != cal.mu_gamma.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        std::cerr << "error: --mu-gamma must be a number or 'equicorrelated'\n";
        return kExitUsage;
      }
    }
    if (cal.output.empty()) {
      cal.output = root + "/prior_J" + std::to_string(cal.options.J) + "_q" + std::to_string(cal.options.q) + ".txt";
    }
    double mu = 0.0;
    const int code = Report(mnpfs_cmd_calibrate(&cal.options, cal.output.c_str(),
                                                cal.diagnostics.empty() ? nullptr : cal.diagnostics.c_str(), &mu,
                                                PrintProgress, nullptr));
    if (code == kExitOk) std::cout << "prior written to " << cal.output << " (mu_gamma = " << mu << ")\n";
    return code;
  }

  if (fit_cmd->parsed()) {
    if (fit.run_dir.empty()) fit.run_dir = root + "/fit-" + fit.variant;
    fit.options.data = fit.data.c_str();
    fit.options.indiv = fit.indiv.empty() ? nullptr : fit.indiv.c_str();
    fit.options.include_intercept = fit.no_intercept ? 0 : 1;
    fit.options.variant = fit.variant.c_str();
    fit.options.prior = fit.prior.empty() ? nullptr : fit.prior.c_str();
    fit.options.run_dir = fit.run_dir.c_str();
    fit.options.has_base = base_opt->count() > 0 ? 1 : 0;
    fit.options.base = fit.base;
    fit.options.eval.threads = threads;
    mnpfs_fit_summary summary{};
    const int code = Report(mnpfs_cmd_fit(&fit.options, &summary, PrintProgress, nullptr));
    if (code == kExitOk) {
      std::printf("in-sample:  hit_rate %.4f  log_score %.4f\n", summary.hit_rate_in, summary.log_score_in);
      if (summary.has_out_of_sample) {
        std::printf("out-sample: hit_rate %.4f  log_score %.4f\n", summary.hit_rate_out, summary.log_score_out);
      }
      std::cout << "run directory: " << fit.run_dir << '\n';
    }
    return code;
  }

  if (simulate->parsed()) {
    return Report(mnpfs_cmd_simulate(&sim.options, sim.output.c_str(),
                                     sim.truth_prefix.empty() ? nullptr : sim.truth_prefix.c_str()));
  }

  if (experiment->parsed()) {
    if (exp.run_dir.empty()) exp.run_dir = root + "/experiment";
    if (exp.paper_scale) {
      std::cerr << "warning: --paper-scale runs 200,000 MCMC iterations per chain on J+1 = 50 alternatives and "
                   "N = 5000 observations; expect a very long runtime\n";
    }
    std::vector<std::string> settings = exp.settings;
    if (exp_alt->count()) settings.push_back("dgp.num_alternatives=" + std::to_string(exp.alternatives));
    if (exp_n->count()) settings.push_back("dgp.N=" + std::to_string(exp.N));
    if (exp_iter->count()) settings.push_back("sampler.total_iterations=" + std::to_string(exp.iterations));
    if (exp_burn->count()) settings.push_back("sampler.burn_in=" + std::to_string(exp.burn_in));
    if (exp_seed->count()) {
      settings.push_back("dgp.seed=" + std::to_string(exp.seed));
      settings.push_back("sampler.seed=" + std::to_string(exp.seed));
    }
    std::vector<const char*> raw;
    for (const auto& s : settings) raw.push_back(s.c_str());
    mnpfs_experiment_options options;
    mnpfs_experiment_options_init(&options);
    options.run_dir = exp.run_dir.c_str();
    options.paper_scale = exp.paper_scale ? 1 : 0;
    options.manifest = exp.manifest.empty() ? nullptr : exp.manifest.c_str();
    options.overrides = raw.data();
    options.num_overrides = raw.size();
    options.sensitivity = exp.sensitivity ? 1 : 0;
    options.threads = threads;
    mnpfs_experiment_summary summary{};
    const int code = Report(mnpfs_cmd_experiment(&options, &summary, PrintProgress, nullptr));
    if (code == kExitOk) {
      if (summary.has_recovery) {
        std::printf("coefficients: RMSE %.4f  MAE %.4f\n", summary.coefficient_rmse, summary.coefficient_mae);
        std::printf("variances:    RMSE %.4f  MAE %.4f\n", summary.variance_rmse, summary.variance_mae);
        std::printf("correlations: RMSE %.4f  MAE %.4f  corr(truth, estimate) %.4f\n", summary.correlation_rmse,
                    summary.correlation_mae, summary.correlation_pearson);
      }
      if (summary.has_sensitivity) {
        std::printf("base sensitivity: identity %.4f  equicorrelated %.4f (mu_gamma* %.4f)\n",
                    summary.identity_sup_distance, summary.equicorrelated_sup_distance, summary.mu_star);
      }
      std::cout << "run directory: " << exp.run_dir << '\n';
    }
    return code;
  }

  if (evaluate->parsed()) {
    if (ev.output.empty()) ev.output = root + "/evaluation";
    std::vector<const char*> raw;
    for (const auto& r : ev.runs) raw.push_back(r.c_str());
    ev.options.runs = raw.data();
    ev.options.num_runs = raw.size();
    ev.options.output = ev.output.c_str();
    ev.options.eval.threads = threads;
    const int code = Report(mnpfs_cmd_evaluate(&ev.options, PrintProgress, nullptr));
    if (code == kExitOk) std::cout << "comparison written to " << ev.output << '\n';
    return code;
  }
  return kExitUsage;
}
