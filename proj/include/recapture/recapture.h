// Copyright 2026 The recapture Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the recapture library. All handles are opaque; every
 * function that can fail returns a recap_status and leaves a message for
 * recap_last_error() on the calling thread. Strings returned by the library
 * stay valid until the owning handle is freed. */
#ifndef RECAPTURE_RECAPTURE_H_
#define RECAPTURE_RECAPTURE_H_

#include <stddef.h>

#if defined(RECAP_BUILDING_LIBRARY)
#define RECAP_API __attribute__((visibility("default")))
#else
#define RECAP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum recap_status {
  RECAP_OK = 0,
  RECAP_E_INPUT = 1,            /* malformed data, bad configuration or arguments */
  RECAP_E_DOMAIN = 2,           /* special function outside its domain */
  RECAP_E_NUMERIC = 3,          /* degenerate baseline, singular information */
  RECAP_E_IDENTIFIABILITY = 4,  /* behavioral effect not estimable */
  RECAP_E_STEP = 5,             /* Newton-Raphson could not make progress */
  RECAP_E_INTERNAL = 99
} recap_status;

typedef struct recap_dataset recap_dataset;
typedef struct recap_report recap_report;

/* Behavioral window. c2 <= 0 and delta_b <= 0 (or infinite) mean unbounded. */
typedef struct recap_window {
  int c1;
  int c2;
  double delta_b;
} recap_window;

typedef struct recap_fit_options {
  const char* model;           /* lattice name such as "hotb", "M_hb", "0" */
  recap_window window;
  int threads;                 /* worker threads, >= 1 */
  int max_iter;                /* EM iterations */
  double tol;                  /* relative log-likelihood change for convergence */
  double catchable_fraction;   /* scale N_hat by 1 / fraction when in (0, 1] */
} recap_fit_options;

RECAP_API const char* recap_version(void);
RECAP_API const char* recap_last_error(void);

/* Classic window, model "hotb", one thread, library defaults otherwise. */
RECAP_API void recap_fit_options_init(recap_fit_options* opts);

/* Reads an events CSV (subject_id,time) and an optional subjects CSV.
 * config_path (JSON ingest configuration) may be NULL when tau > 0 is given;
 * a positive tau overrides the configured one. truncate_at > 0 keeps only
 * captures in (0, truncate_at]. */
RECAP_API recap_status recap_dataset_load(const char* events_path, const char* subjects_path,
                                          const char* config_path, double tau, double truncate_at,
                                          recap_dataset** out);
RECAP_API recap_status recap_dataset_truncate(const recap_dataset* data, double t,
                                              recap_dataset** out);
RECAP_API size_t recap_dataset_size(const recap_dataset* data);
RECAP_API size_t recap_dataset_captures(const recap_dataset* data);
RECAP_API void recap_dataset_free(recap_dataset* data);

/* A fit that does not converge still returns RECAP_OK with a report whose
 * recap_report_converged() is 0. */
RECAP_API recap_status recap_fit(const recap_dataset* data, const recap_fit_options* opts,
                                 recap_report** out);

/* Fits opts->model at every (c1, c2, delta_b) with c1 < c2. c2 values <= 0
 * and delta_b values <= 0 stand for unbounded. An empty list means its
 * default: c1 = 1, c2 and delta_b unbounded. */
RECAP_API recap_status recap_grid(const recap_dataset* data, const recap_fit_options* opts,
                                  const int* c1, size_t n_c1, const int* c2, size_t n_c2,
                                  const double* delta_b, size_t n_delta, recap_report** out);

/* Chao and M0 from the capture counts, plus a fit of each named model
 * (all 16 when models is NULL). */
RECAP_API recap_status recap_compare_dataset(const recap_dataset* data,
                                             const recap_fit_options* opts,
                                             const char* const* models, size_t n_models,
                                             recap_report** out);
/* Chao and M0 from a `captures,frequency` table. */
RECAP_API recap_status recap_compare_counts(const char* counts_path, recap_report** out);

/* Simulates from a JSON configuration and writes events.csv, subjects.csv
 * and config.json (an ingest configuration carrying the settings as
 * provenance) into out_dir. seed_override != 0 replaces the configured seed. */
RECAP_API recap_status recap_simulate(const char* config_json, unsigned long long seed_override,
                                      int threads, const char* out_dir, recap_report** out);

RECAP_API const char* recap_report_json(const recap_report* report);
RECAP_API const char* recap_report_text(const recap_report* report);
RECAP_API int recap_report_converged(const recap_report* report);
/* NaN when the report carries no log-likelihood. */
RECAP_API double recap_report_loglik(const recap_report* report);
/* Writes report.json and report.txt into dir (created if missing). */
RECAP_API recap_status recap_report_write(const recap_report* report, const char* dir);
RECAP_API void recap_report_free(recap_report* report);

#ifdef __cplusplus
}
#endif

#endif /* RECAPTURE_RECAPTURE_H_ */
