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

#include "mnpfs/mnpfs.h"

#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "mnpfs/choice_data.hpp"
#include "mnpfs/error.hpp"
#include "mnpfs/io.hpp"
#include "mnpfs/pipeline.hpp"
#include "mnpfs/prior.hpp"
#include "mnpfs/version.hpp"

using mnpfs::ChoiceDataset;
using mnpfs::CalibratedPrior;
using mnpfs::ErrorCode;

extern "C" {

struct mnpfs_dataset {
  ChoiceDataset rep;
};

struct mnpfs_prior {
  CalibratedPrior rep;
};

}  // extern "C"

namespace {

thread_local std::string last_error;

mnpfs_status ToStatus(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return MNPFS_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return MNPFS_ERR_IO;
    case ErrorCode::kParse: return MNPFS_ERR_PARSE;
    case ErrorCode::kNumerical: return MNPFS_ERR_NUMERICAL;
    case ErrorCode::kConvergence: return MNPFS_ERR_CONVERGENCE;
    case ErrorCode::kInvariant: return MNPFS_ERR_INVARIANT;
    case ErrorCode::kMismatch: return MNPFS_ERR_MISMATCH;
    case ErrorCode::kDegenerate: return MNPFS_ERR_DEGENERATE;
  }
  return MNPFS_ERR_INTERNAL;
}

template <typename Fn>
mnpfs_status Guard(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return MNPFS_OK;
  } catch (const mnpfs::Error& e) {
    last_error = e.what();
    return ToStatus(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return MNPFS_ERR_INTERNAL;
}

void NotNull(const void* p, const char* what) {
  if (p == nullptr) mnpfs::Fail(ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

mnpfs::ProgressFn Progress(mnpfs_progress_fn fn, void* user) {
  if (fn == nullptr) return {};
  return [fn, user](const std::string& msg) { fn(msg.c_str(), user); };
}

mnpfs::SamplerConfig ToSampler(const mnpfs_sampler_options& o) {
  mnpfs::SamplerConfig c;
  c.total_iterations = o.total_iterations;
  c.burn_in = o.burn_in;
  c.thinning = o.thinning;
  c.beta_prior_variance = o.beta_prior_variance;
  c.block_size = o.block_size;
  c.adaptation_batch = o.adaptation_batch;
  c.target_low = o.target_low;
  c.target_high = o.target_high;
  c.initial_proposal_sd = o.initial_proposal_sd;
  c.seed = o.seed;
  c.q = o.q;
  return c;
}

mnpfs::FitOptions ToFit(const mnpfs_eval_options& o) {
  mnpfs::FitOptions f;
  f.replicates = o.replicates;
  f.pmf_max_draws = o.pmf_max_draws;
  f.pmf_seed = o.pmf_seed;
  f.threads = o.threads == 0 ? 1 : o.threads;
  return f;
}

mnpfs::CalibrateCommand ToCalibrate(const mnpfs_calibrate_options& o) {
  mnpfs::CalibrateCommand c;
  c.J = o.J;
  c.q = o.q;
  if (o.solve_mu_gamma) {
    c.mu_gamma.reset();
  } else {
    c.mu_gamma = o.mu_gamma;
  }
  c.sigma_gamma = o.sigma_gamma;
  c.nu = o.nu;
  c.M = o.M;
  c.seed = o.seed;
  c.threads = o.threads == 0 ? 1 : o.threads;
  c.solver_draws = o.solver_draws;
  return c;
}

}  // namespace

extern "C" {

const char* mnpfs_version(void) { return mnpfs::kVersion; }

const char* mnpfs_last_error(void) { return last_error.c_str(); }

mnpfs_status mnpfs_dataset_load(const char* path, const char* indiv_path, int include_intercept,
                                mnpfs_dataset** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    std::optional<std::filesystem::path> indiv;
    if (indiv_path != nullptr) indiv = indiv_path;
    auto handle = std::make_unique<mnpfs_dataset>();
    handle->rep = mnpfs::LoadChoiceCsv(path, indiv, include_intercept != 0);
    *out = handle.release();
  });
}

mnpfs_status mnpfs_dataset_save(const mnpfs_dataset* dataset, const char* path) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    NotNull(path, "path");
    mnpfs::WriteChoiceCsv(dataset->rep, path);
  });
}

void mnpfs_dataset_free(mnpfs_dataset* dataset) { delete dataset; }

mnpfs_status mnpfs_dataset_get_info(const mnpfs_dataset* dataset, mnpfs_dataset_info* out) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    NotNull(out, "out");
    const ChoiceDataset& d = dataset->rep;
    out->num_observations = d.N();
    out->num_alternatives = d.num_alternatives;
    out->num_alt_covariates = d.k_a();
    out->num_indiv_covariates = d.k_d();
    out->num_coefficients = d.K();
    out->base_category = d.base_category();
  });
}

mnpfs_status mnpfs_dataset_choices(const mnpfs_dataset* dataset, int* out, size_t capacity) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    NotNull(out, "out");
    const auto& y = dataset->rep.choices;
    if (capacity < y.size()) {
      mnpfs::Fail(ErrorCode::kInvalidArgument, "buffer holds " + std::to_string(capacity) + " entries but " +
                                                   std::to_string(y.size()) + " are needed");
    }
    std::copy(y.begin(), y.end(), out);
  });
}

mnpfs_status mnpfs_dataset_relabel(const mnpfs_dataset* dataset, int base_label, mnpfs_dataset** out) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    NotNull(out, "out");
    const ChoiceDataset& d = dataset->rep;
    int internal = -1;
    for (std::size_t k = 0; k < d.num_alternatives; ++k) {
      if (d.Label(static_cast<int>(k)) == base_label) internal = static_cast<int>(k);
    }
    if (internal < 0) mnpfs::Fail(ErrorCode::kInvalidArgument, "no alternative with id " + std::to_string(base_label));
    auto handle = std::make_unique<mnpfs_dataset>();
    handle->rep = mnpfs::RelabelBaseCategory(d, internal);
    *out = handle.release();
  });
}

void mnpfs_calibrate_options_init(mnpfs_calibrate_options* options) {
  if (options == nullptr) return;
  const mnpfs::CalibrateCommand c;
  options->J = 0;
  options->q = c.q;
  options->mu_gamma = 0.0;
  options->solve_mu_gamma = 0;
  options->sigma_gamma = c.sigma_gamma;
  options->nu = c.nu;
  options->M = c.M;
  options->seed = c.seed;
  options->threads = 1;
  options->solver_draws = c.solver_draws;
}

mnpfs_status mnpfs_prior_calibrate(const mnpfs_calibrate_options* options, mnpfs_prior** out) {
  return Guard([&] {
    NotNull(options, "options");
    NotNull(out, "out");
    const mnpfs::CalibrateCommand c = ToCalibrate(*options);
    mnpfs::Hyperparameters theta;
    theta.sigma_gamma = c.sigma_gamma;
    theta.nu = c.nu;
    theta.q = c.q;
    theta.mu_gamma = c.mu_gamma ? *c.mu_gamma
                                : mnpfs::SolveEquicorrelatedMu(c.sigma_gamma, c.nu, c.q, c.solver_draws, c.seed);
    mnpfs::CalibrationOptions co;
    co.M = c.M;
    co.seed = c.seed;
    co.threads = c.threads;
    auto handle = std::make_unique<mnpfs_prior>();
    handle->rep = mnpfs::CalibratePrior(theta, c.J, co);
    *out = handle.release();
  });
}

mnpfs_status mnpfs_prior_load(const char* path, mnpfs_prior** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    auto handle = std::make_unique<mnpfs_prior>();
    handle->rep = mnpfs::LoadPrior(path);
    *out = handle.release();
  });
}

mnpfs_status mnpfs_prior_save(const mnpfs_prior* prior, const char* path) {
  return Guard([&] {
    NotNull(prior, "prior");
    NotNull(path, "path");
    mnpfs::SavePrior(prior->rep, path);
  });
}

void mnpfs_prior_free(mnpfs_prior* prior) { delete prior; }

size_t mnpfs_prior_num_margins(const mnpfs_prior* prior) { return prior == nullptr ? 0 : prior->rep.num_angles(); }

mnpfs_status mnpfs_prior_margin(const mnpfs_prior* prior, size_t index, mnpfs_margin* out) {
  return Guard([&] {
    NotNull(prior, "prior");
    NotNull(out, "out");
    const CalibratedPrior& p = prior->rep;
    if (index >= p.num_angles()) mnpfs::Fail(ErrorCode::kInvalidArgument, "margin index out of range");
    const auto& m = p.margins[index];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    *out = {m.mu, m.tau, m.eta, m.upper_bound, index < p.avg_loglik.size() ? p.avg_loglik[index] : nan,
            index < p.ks_distance.size() ? p.ks_distance[index] : nan};
  });
}

mnpfs_status mnpfs_prior_log_density(const mnpfs_prior* prior, const double* kappa, size_t n, double* out) {
  return Guard([&] {
    NotNull(prior, "prior");
    NotNull(kappa, "kappa");
    NotNull(out, "out");
    mnpfs::AngleVector k{Eigen::Map<const mnpfs::Vector>(kappa, static_cast<Eigen::Index>(n))};
    *out = mnpfs::LogPriorKappa(k, prior->rep);
  });
}

mnpfs_status mnpfs_solve_equicorrelated_mu(double sigma_gamma, double nu, size_t q, size_t draws, uint64_t seed,
                                           double* out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = mnpfs::SolveEquicorrelatedMu(sigma_gamma, nu, q, draws, seed);
  });
}

void mnpfs_sampler_options_init(mnpfs_sampler_options* options) {
  if (options == nullptr) return;
  const mnpfs::SamplerConfig c;
  *options = {c.total_iterations, c.burn_in,   c.thinning,            c.beta_prior_variance,
              c.block_size,       c.adaptation_batch, c.target_low, c.target_high,
              c.initial_proposal_sd, c.seed, c.q};
}

void mnpfs_eval_options_init(mnpfs_eval_options* options) {
  if (options == nullptr) return;
  const mnpfs::FitOptions f;
  *options = {f.replicates, f.pmf_max_draws, f.pmf_seed, f.threads};
}

void mnpfs_fit_options_init(mnpfs_fit_options* options) {
  if (options == nullptr) return;
  const mnpfs::FitCommand f;
  options->data = nullptr;
  options->indiv = nullptr;
  options->include_intercept = 1;
  options->variant = "mnp-fs";
  options->prior = nullptr;
  options->run_dir = nullptr;
  options->has_base = 0;
  options->base = 0;
  options->train_fraction = f.train_fraction;
  options->split_seed = f.split_seed;
  mnpfs_sampler_options_init(&options->sampler);
  mnpfs_eval_options_init(&options->eval);
}

void mnpfs_dgp_options_init(mnpfs_dgp_options* options) {
  if (options == nullptr) return;
  const mnpfs::DgpConfig d = mnpfs::DeskScaleExperiment().dgp;
  *options = {d.num_alternatives, d.N, d.intercept_variance, d.price_coefficient, d.iw_off_diagonal, d.seed};
}

void mnpfs_experiment_options_init(mnpfs_experiment_options* options) {
  if (options == nullptr) return;
  *options = {nullptr, 0, nullptr, nullptr, 0, 0, 1};
}

void mnpfs_evaluate_options_init(mnpfs_evaluate_options* options) {
  if (options == nullptr) return;
  options->runs = nullptr;
  options->num_runs = 0;
  options->output = nullptr;
  mnpfs_eval_options_init(&options->eval);
}

mnpfs_status mnpfs_cmd_calibrate(const mnpfs_calibrate_options* options, const char* output, const char* diagnostics,
                                 double* mu_gamma_out, mnpfs_progress_fn progress, void* user_data) {
  return Guard([&] {
    NotNull(options, "options");
    NotNull(output, "output");
    mnpfs::CalibrateCommand c = ToCalibrate(*options);
    c.output = output;
    if (diagnostics != nullptr) c.diagnostics = diagnostics;
    const CalibratedPrior prior = mnpfs::RunCalibrate(c, Progress(progress, user_data));
    if (mu_gamma_out != nullptr) *mu_gamma_out = prior.theta.mu_gamma;
  });
}

mnpfs_status mnpfs_cmd_fit(const mnpfs_fit_options* options, mnpfs_fit_summary* summary, mnpfs_progress_fn progress,
                           void* user_data) {
  return Guard([&] {
    NotNull(options, "options");
    NotNull(options->data, "data");
    NotNull(options->run_dir, "run_dir");
    NotNull(options->variant, "variant");
    mnpfs::FitCommand c;
    c.data = options->data;
    if (options->indiv != nullptr) c.indiv = options->indiv;
    c.include_intercept = options->include_intercept != 0;
    c.variant = options->variant;
    if (options->prior != nullptr) c.prior = options->prior;
    c.run_dir = options->run_dir;
    if (options->has_base) c.base = options->base;
    c.train_fraction = options->train_fraction;
    c.split_seed = options->split_seed;
    c.sampler = ToSampler(options->sampler);
    c.fit = ToFit(options->eval);
    const auto reports = mnpfs::RunFit(c, Progress(progress, user_data));
    if (summary != nullptr) {
      *summary = {};
      for (const auto& r : reports) {
        if (r.sample == "in") {
          summary->hit_rate_in = r.hit_rate;
          summary->log_score_in = r.log_score;
        } else {
          summary->hit_rate_out = r.hit_rate;
          summary->log_score_out = r.log_score;
          summary->has_out_of_sample = 1;
        }
      }
    }
  });
}

mnpfs_status mnpfs_cmd_simulate(const mnpfs_dgp_options* options, const char* output, const char* truth_prefix) {
  return Guard([&] {
    NotNull(options, "options");
    NotNull(output, "output");
    mnpfs::SimulateCommand c;
    c.dgp.num_alternatives = options->num_alternatives;
    c.dgp.N = options->num_observations;
    c.dgp.intercept_variance = options->intercept_variance;
    c.dgp.price_coefficient = options->price_coefficient;
    c.dgp.iw_off_diagonal = options->iw_off_diagonal;
    c.dgp.seed = options->seed;
    c.output = output;
    if (truth_prefix != nullptr) c.truth_prefix = truth_prefix;
    mnpfs::RunSimulate(c);
  });
}

mnpfs_status mnpfs_cmd_experiment(const mnpfs_experiment_options* options, mnpfs_experiment_summary* summary,
                                  mnpfs_progress_fn progress, void* user_data) {
  return Guard([&] {
    NotNull(options, "options");
    NotNull(options->run_dir, "run_dir");
    mnpfs::ExperimentCommand c;
    c.config = options->paper_scale ? mnpfs::PaperScaleExperiment() : mnpfs::DeskScaleExperiment();
    if (options->manifest != nullptr) {
      mnpfs::Manifest manifest;
      try {
        manifest = mnpfs::Manifest::Read(options->manifest);
      } catch (const mnpfs::Error& e) {
        mnpfs::Fail(ErrorCode::kInvalidArgument, e.what());
      }
      mnpfs::ApplyExperimentManifest(manifest, c.config, c.sensitivity);
    }
    mnpfs::Manifest overrides;
    for (size_t i = 0; i < options->num_overrides; ++i) {
      NotNull(options->overrides, "overrides");
      const std::string entry = options->overrides[i];
      const auto eq = entry.find('=');
      if (eq == std::string::npos) mnpfs::Fail(ErrorCode::kInvalidArgument, "override '" + entry + "' is not key=value");
      overrides.Set(entry.substr(0, eq), entry.substr(eq + 1));
    }
    mnpfs::ApplyExperimentManifest(overrides, c.config, c.sensitivity);
    c.config.fit.threads = options->threads == 0 ? 1 : options->threads;
    c.run_sensitivity = options->sensitivity != 0;
    c.run_dir = options->run_dir;
    const mnpfs::ExperimentSummary s = mnpfs::RunExperiment(c, Progress(progress, user_data));
    if (summary != nullptr) {
      *summary = {};
      summary->has_recovery = s.has_recovery ? 1 : 0;
      summary->coefficient_rmse = s.coefficient_error.rmse;
      summary->coefficient_mae = s.coefficient_error.mae;
      summary->variance_rmse = s.variance_error.rmse;
      summary->variance_mae = s.variance_error.mae;
      summary->correlation_rmse = s.correlation_error.rmse;
      summary->correlation_mae = s.correlation_error.mae;
      summary->correlation_pearson = s.correlation_pearson;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      summary->log_score_out_factor = nan;
      summary->log_score_out_identity = nan;
      for (const auto& r : s.metrics) {
        if (r.sample != "out") continue;
        if (r.model == "mnp-fs") summary->log_score_out_factor = r.log_score;
        if (r.model == "mnp-i") summary->log_score_out_identity = r.log_score;
      }
      if (s.sensitivity) {
        summary->has_sensitivity = 1;
        summary->mu_star = s.sensitivity->mu_star;
        summary->identity_sup_distance = s.sensitivity->identity_sup_distance;
        summary->equicorrelated_sup_distance = s.sensitivity->equicorrelated_sup_distance;
      }
    }
  });
}

mnpfs_status mnpfs_cmd_evaluate(const mnpfs_evaluate_options* options, mnpfs_progress_fn progress, void* user_data) {
  return Guard([&] {
    NotNull(options, "options");
    NotNull(options->output, "output");
    mnpfs::EvaluateCommand c;
    for (size_t i = 0; i < options->num_runs; ++i) {
      NotNull(options->runs, "runs");
      NotNull(options->runs[i], "run directory");
      c.runs.emplace_back(options->runs[i]);
    }
    c.output = options->output;
    c.fit = ToFit(options->eval);
    mnpfs::RunEvaluate(c, Progress(progress, user_data));
  });
}

}  // extern "C"
