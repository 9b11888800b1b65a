// Copyright 2026 The lidarloc Authors
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


/* C interface to the lidarloc toolkit. Objects are opaque handles created
 * and released by the library. Every call returns a status; on failure the
 * calling thread's message is available from lloc_last_error(). */

#ifndef LIDARLOC_LIDARLOC_H_
#define LIDARLOC_LIDARLOC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LLOC_API __declspec(dllexport)
#else
#define LLOC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lloc_status {
  LLOC_OK = 0,
  LLOC_ERR_INVALID_ARGUMENT = 1,
  LLOC_ERR_DOMAIN = 2,
  LLOC_ERR_INSUFFICIENT_DATA = 3,
  LLOC_ERR_RANK_DEFICIENT = 4,
  LLOC_ERR_DEGENERATE_FIT = 5,
  LLOC_ERR_GRAPH_INTEGRITY = 6,
  LLOC_ERR_CONFIG = 7,
  LLOC_ERR_IO = 8,
  LLOC_ERR_ESTIMATION = 9,
  LLOC_ERR_INTERNAL = 100
} lloc_status;

typedef enum lloc_backend {
  LLOC_BACKEND_DOPPLER = 0,
  LLOC_BACKEND_ICP = 1,
  LLOC_BACKEND_BOTH = 2
} lloc_backend;

typedef struct lloc_config lloc_config;
typedef struct lloc_results lloc_results;

/* One sweep row. Strings stay valid until the owning results are freed. */
typedef struct lloc_result_row {
  const char* route;
  const char* backend;
  size_t interval;
  double runtime_ms;
  double rt_ratio;
  double lateral_m;
  double longitudinal_m;
  double vertical_m;
  double roll_deg;
  double pitch_deg;
  double heading_deg;
  const char* knee_flag;
} lloc_result_row;

/* Message of the last failed call on this thread; empty after success. */
LLOC_API const char* lloc_last_error(void);
LLOC_API const char* lloc_version(void);
LLOC_API const char* lloc_status_name(lloc_status status);

LLOC_API lloc_status lloc_config_load(const char* path, lloc_config** out);
LLOC_API lloc_status lloc_config_parse(const char* json_text, lloc_config** out);
LLOC_API void lloc_config_free(lloc_config* config);

LLOC_API lloc_status lloc_config_set_intervals(lloc_config* config, const size_t* intervals,
                                               size_t count);
LLOC_API lloc_status lloc_config_set_backend(lloc_config* config, lloc_backend backend);
LLOC_API lloc_status lloc_config_set_seed(lloc_config* config, uint64_t seed);
/* 0 restores the per-backend defaults. */
LLOC_API lloc_status lloc_config_set_threads(lloc_config* config, int threads);
LLOC_API lloc_status lloc_config_set_serial_timing(lloc_config* config, int enabled);
LLOC_API lloc_status lloc_config_set_output(lloc_config* config, const char* directory);
/* Copies the output directory into `buffer`; fails when it does not fit. */
LLOC_API lloc_status lloc_config_get_output(const lloc_config* config, char* buffer,
                                            size_t size);
LLOC_API lloc_status lloc_config_frame_count(const lloc_config* config, size_t* frames);

/* Teach pass; writes the pose graph to <output>/graph. */
LLOC_API lloc_status lloc_teach(const lloc_config* config, size_t* vertex_count);

/* Repeat sweep against <output>/graph; writes <output>/results.csv and one
 * trajectory file per cell. `out` may be NULL. */
LLOC_API lloc_status lloc_sweep(const lloc_config* config, lloc_results** out);

LLOC_API lloc_status lloc_results_read(const char* csv_path, lloc_results** out);
LLOC_API size_t lloc_results_count(const lloc_results* results);
LLOC_API lloc_status lloc_results_row(const lloc_results* results, size_t index,
                                      lloc_result_row* row);
LLOC_API void lloc_results_free(lloc_results* results);

/* Pareto curves and knee summary from a results CSV into `directory`. The
 * summary string is released with lloc_string_free. */
LLOC_API lloc_status lloc_report(const char* csv_path, const char* directory, char** summary);
LLOC_API void lloc_string_free(char* text);

/* Minimal-rectangle knee of (runtime, error) points. */
LLOC_API lloc_status lloc_knee_point(const double* runtime_ms, const double* error, size_t count,
                                     size_t* index);

/* Component errors of `estimate` against `truth`, both row-major 3x4
 * vehicle-to-map poses. `out` receives lateral, longitudinal, vertical (m)
 * then roll, pitch, heading (deg). */
LLOC_API lloc_status lloc_pose_error(const double estimate[12], const double truth[12],
                                     double out[6]);

#ifdef __cplusplus
}
#endif

#endif  /* LIDARLOC_LIDARLOC_H_ */
