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

/* C interface to the mnpfs library: factor-covariance multinomial probit
 * models with spherical-angle priors.
 *
 * Every function that can fail returns an mnpfs_status; on failure a
 * description is available from mnpfs_last_error() on the same thread.
 * Handles are opaque and owned by the caller once returned. */

#ifndef MNPFS_MNPFS_H_
#define MNPFS_MNPFS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(MNPFS_BUILDING_LIBRARY)
#define MNPFS_API __attribute__((visibility("default")))
#else
#define MNPFS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mnpfs_status {
  MNPFS_OK = 0,
  MNPFS_ERR_INVALID_ARGUMENT = 1,
  MNPFS_ERR_IO = 2,
  MNPFS_ERR_PARSE = 3,
  MNPFS_ERR_NUMERICAL = 4,
  MNPFS_ERR_CONVERGENCE = 5,
  MNPFS_ERR_INVARIANT = 6,
  MNPFS_ERR_MISMATCH = 7,
  MNPFS_ERR_DEGENERATE = 8,
  MNPFS_ERR_INTERNAL = 99
} mnpfs_status;

MNPFS_API const char* mnpfs_version(void);

/* Message of the last failure on the calling thread; empty after success.
 * Valid until the next mnpfs call on this thread. */
MNPFS_API const char* mnpfs_last_error(void);

/* Receives progress lines from long-running commands. */
typedef void (*mnpfs_progress_fn)(const char* message, void* user_data);

/* ------------------------------------------------------------------ */
/* Datasets                                                            */

typedef struct mnpfs_dataset mnpfs_dataset;

typedef struct mnpfs_dataset_info {
  size_t num_observations;
  size_t num_alternatives; /* J + 1 */
  size_t num_alt_covariates;
  size_t num_indiv_covariates;
  size_t num_coefficients;
  int base_category; /* alternative id of internal category 0 */
} mnpfs_dataset_info;

/* Long-format CSV (obs_id, alt_id, chosen, covariates...). indiv_path may
 * be NULL. */
MNPFS_API mnpfs_status mnpfs_dataset_load(const char* path, const char* indiv_path, int include_intercept,
                                          mnpfs_dataset** out);
MNPFS_API mnpfs_status mnpfs_dataset_save(const mnpfs_dataset* dataset, const char* path);
MNPFS_API void mnpfs_dataset_free(mnpfs_dataset* dataset);
MNPFS_API mnpfs_status mnpfs_dataset_get_info(const mnpfs_dataset* dataset, mnpfs_dataset_info* out);
/* Copies the internal choice indices (0..J) into out[0..capacity). */
MNPFS_API mnpfs_status mnpfs_dataset_choices(const mnpfs_dataset* dataset, int* out, size_t capacity);
/* New dataset whose base category is the alternative with id base_label. */
MNPFS_API mnpfs_status mnpfs_dataset_relabel(const mnpfs_dataset* dataset, int base_label, mnpfs_dataset** out);

/* ------------------------------------------------------------------ */
/* Priors                                                              */

typedef struct mnpfs_prior mnpfs_prior;

typedef struct mnpfs_calibrate_options {
  size_t J;
  size_t q;
  double mu_gamma;
  int solve_mu_gamma; /* nonzero: use the equicorrelated loading mean */
  double sigma_gamma;
  double nu;
  size_t M;
  uint64_t seed;
  size_t threads;
  size_t solver_draws;
} mnpfs_calibrate_options;

typedef struct mnpfs_margin {
  double mu;
  double tau;
  double eta;
  double upper_bound;
  double avg_loglik;  /* NaN when unavailable */
  double ks_distance; /* NaN when unavailable */
} mnpfs_margin;

MNPFS_API void mnpfs_calibrate_options_init(mnpfs_calibrate_options* options);
MNPFS_API mnpfs_status mnpfs_prior_calibrate(const mnpfs_calibrate_options* options, mnpfs_prior** out);
MNPFS_API mnpfs_status mnpfs_prior_load(const char* path, mnpfs_prior** out);
MNPFS_API mnpfs_status mnpfs_prior_save(const mnpfs_prior* prior, const char* path);
MNPFS_API void mnpfs_prior_free(mnpfs_prior* prior);
MNPFS_API size_t mnpfs_prior_num_margins(const mnpfs_prior* prior);
MNPFS_API mnpfs_status mnpfs_prior_margin(const mnpfs_prior* prior, size_t index, mnpfs_margin* out);
/* Sum of the margin log densities at the angles kappa[0..n). */
MNPFS_API mnpfs_status mnpfs_prior_log_density(const mnpfs_prior* prior, const double* kappa, size_t n,
                                               double* out);
MNPFS_API mnpfs_status mnpfs_solve_equicorrelated_mu(double sigma_gamma, double nu, size_t q, size_t draws,
                                                     uint64_t seed, double* out);

/* ------------------------------------------------------------------ */
/* Commands                                                            */

typedef struct mnpfs_sampler_options {
  size_t total_iterations;
  size_t burn_in;
  size_t thinning;
  double beta_prior_variance;
  size_t block_size;
  size_t adaptation_batch;
  double target_low;
  double target_high;
  double initial_proposal_sd;
  uint64_t seed;
  size_t q;
} mnpfs_sampler_options;

typedef struct mnpfs_eval_options {
  size_t replicates;
  size_t pmf_max_draws; /* 0 uses every draw */
  uint64_t pmf_seed;
  size_t threads;
} mnpfs_eval_options;

typedef struct mnpfs_fit_options {
  const char* data;
  const char* indiv; /* may be NULL */
  int include_intercept;
  const char* variant; /* "mnp-fs", "mnp-i" or "naive" */
  const char* prior;   /* required for "mnp-fs" */
  const char* run_dir;
  int has_base;
  int base; /* alternative id used as base when has_base */
  double train_fraction;
  uint64_t split_seed;
  mnpfs_sampler_options sampler;
  mnpfs_eval_options eval;
} mnpfs_fit_options;

typedef struct mnpfs_fit_summary {
  double hit_rate_in;
  double log_score_in;
  double hit_rate_out;
  double log_score_out;
  int has_out_of_sample;
} mnpfs_fit_summary;

typedef struct mnpfs_dgp_options {
  size_t num_alternatives;
  size_t num_observations;
  double intercept_variance;
  double price_coefficient;
  double iw_off_diagonal;
  uint64_t seed;
} mnpfs_dgp_options;

typedef struct mnpfs_experiment_options {
  const char* run_dir;
  int paper_scale;         /* start from the paper-scale preset */
  const char* manifest;    /* key = value file applied over the preset; may be NULL */
  const char* const* overrides; /* "key=value" entries applied last */
  size_t num_overrides;
  int sensitivity;
  size_t threads;
} mnpfs_experiment_options;

typedef struct mnpfs_experiment_summary {
  int has_recovery;
  double coefficient_rmse, coefficient_mae;
  double variance_rmse, variance_mae;
  double correlation_rmse, correlation_mae;
  double correlation_pearson;
  double log_score_out_factor;
  double log_score_out_identity;
  int has_sensitivity;
  double mu_star;
  double identity_sup_distance;
  double equicorrelated_sup_distance;
} mnpfs_experiment_summary;

typedef struct mnpfs_evaluate_options {
  const char* const* runs;
  size_t num_runs;
  const char* output;
  mnpfs_eval_options eval;
} mnpfs_evaluate_options;

MNPFS_API void mnpfs_sampler_options_init(mnpfs_sampler_options* options);
MNPFS_API void mnpfs_eval_options_init(mnpfs_eval_options* options);
MNPFS_API void mnpfs_fit_options_init(mnpfs_fit_options* options);
/* Desk-scale preset: 10 alternatives, 2000 observations. */
MNPFS_API void mnpfs_dgp_options_init(mnpfs_dgp_options* options);
MNPFS_API void mnpfs_experiment_options_init(mnpfs_experiment_options* options);
MNPFS_API void mnpfs_evaluate_options_init(mnpfs_evaluate_options* options);

/* Writes the prior file and <diagnostics> (or <output>.diagnostics.csv
 * when diagnostics is NULL). mu_gamma_out may be NULL. */
MNPFS_API mnpfs_status mnpfs_cmd_calibrate(const mnpfs_calibrate_options* options, const char* output,
                                           const char* diagnostics, double* mu_gamma_out,
                                           mnpfs_progress_fn progress, void* user_data);
MNPFS_API mnpfs_status mnpfs_cmd_fit(const mnpfs_fit_options* options, mnpfs_fit_summary* summary,
                                     mnpfs_progress_fn progress, void* user_data);
/* truth_prefix may be NULL. */
MNPFS_API mnpfs_status mnpfs_cmd_simulate(const mnpfs_dgp_options* options, const char* output,
                                          const char* truth_prefix);
MNPFS_API mnpfs_status mnpfs_cmd_experiment(const mnpfs_experiment_options* options,
                                            mnpfs_experiment_summary* summary, mnpfs_progress_fn progress,
                                            void* user_data);
/* Writes comparison.txt, comparison.csv and pvalues.csv into output. */
MNPFS_API mnpfs_status mnpfs_cmd_evaluate(const mnpfs_evaluate_options* options, mnpfs_progress_fn progress,
                                          void* user_data);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif /* MNPFS_MNPFS_H_ */
