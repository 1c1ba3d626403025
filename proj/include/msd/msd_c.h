/*
 * Copyright 2026 The msdecomp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MSD_C_H
#define MSD_C_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MSD_API __declspec(dllexport)
#else
#define MSD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  MSD_OK = 0,
  MSD_ERR_ARG = 1,
  MSD_ERR_CONFIG = 2,
  MSD_ERR_NUMERIC = 3,
  MSD_ERR_IO = 4,
  MSD_ERR_INTERNAL = 5
} msd_status;

typedef enum {
  MSD_SERIES_KL = 0,
  MSD_SERIES_OBJECTIVE = 1,
  MSD_SERIES_LAMBDA = 2,
  MSD_SERIES_PHI_NORM = 3,
  MSD_SERIES_BANDWIDTH = 4
} msd_series;

typedef enum { MSD_SCHEME_EULER = 0, MSD_SCHEME_RK4 = 1 } msd_scheme;
typedef enum { MSD_LAMBDA_EQUALITY = 0, MSD_LAMBDA_POSITIVE_PART = 1 } msd_lambda_variant;

typedef struct msd_config msd_config_t;
typedef struct msd_run msd_run_t;

MSD_API const char* msd_version(void);

/* Message of the last failing call on this thread; "" after a success. */
MSD_API const char* msd_last_error(void);

/* Strings handed out by the library. */
MSD_API void msd_string_free(char* s);

MSD_API msd_status msd_config_load(const char* path, msd_config_t** out);
MSD_API msd_status msd_config_parse(const char* text, msd_config_t** out);
/* Re-validates the whole config with section.key replaced by value. */
MSD_API msd_status msd_config_set(msd_config_t* cfg, const char* section, const char* key, const char* value);
MSD_API void msd_config_free(msd_config_t* cfg);

/* Runs the flow and writes its output directory. A run stopped by a numerical
 * failure returns MSD_ERR_NUMERIC and still hands out *out, holding the series
 * up to the last good iteration. */
MSD_API msd_status msd_run_execute(const msd_config_t* cfg, msd_run_t** out);
MSD_API size_t msd_run_length(const msd_run_t* run);
MSD_API size_t msd_run_groups(const msd_run_t* run);
/* -1 when the run completed. */
MSD_API int64_t msd_run_failed_at(const msd_run_t* run);
MSD_API const char* msd_run_dir(const msd_run_t* run);

/* Copies up to cap values; *needed receives the full length. Passing buf =
 * NULL with cap = 0 queries the size. MSD_ERR_ARG when cap is too small. */
MSD_API msd_status msd_run_series(const msd_run_t* run, msd_series which, double* buf, size_t cap, size_t* needed);
MSD_API msd_status msd_run_weights(const msd_run_t* run, size_t t, double* buf, size_t cap, size_t* needed);
MSD_API void msd_run_free(msd_run_t* run);

/* baseline: "slices:<axis>", "slices:best", "quantile:<w1>,<w2>",
 * "grand_league" or "run:<dir>". *json_out is freed with msd_string_free. */
MSD_API msd_status msd_compare(const char* run_dir, const char* baseline, double* improvement, char** json_out);
MSD_API msd_status msd_diagnose(const char* snapshot_path, const char* out_dir, char** json_out);
/* *warnings_out holds newline-separated warnings, possibly empty. */
MSD_API msd_status msd_emit_plots(const char* run_dir, char** warnings_out);

/* out_csv may be NULL. */
MSD_API msd_status msd_euclid_run(const char* problem, double alpha, double tau, msd_scheme scheme,
                                  msd_lambda_variant variant, double t_end, const char* out_csv, char** json_out);

#ifdef __cplusplus
}
#endif

#endif
