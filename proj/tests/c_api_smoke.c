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

/* Exercises the C interface from C: status reporting, config handling,
 * knee and pose-error helpers, and the report round trip. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "lidarloc/lidarloc.h"

static int failures = 0;

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: check failed: %s (last error: %s)\n",  \
              __FILE__, __LINE__, #cond, lloc_last_error());         \
      ++failures;                                                    \
    }                                                                \
  } while (0)

static const char* kConfig =
    "{\"route\": {\"segments\": [{\"duration\": 3, \"twist\": [8,0,0,0,0,0]}]},"
    " \"output\": \"smoke_out\"}";

int main(int argc, char** argv) {
  const char* dir = argc > 1 ? argv[1] : ".";
  lloc_config* config = NULL;
  char buffer[512];
  char path[1024];
  size_t frames = 0;

  CHECK(strlen(lloc_version()) > 0);
  CHECK(lloc_config_parse("{\"bogus\": 1}", &config) == LLOC_ERR_CONFIG);
  CHECK(config == NULL);
  CHECK(strstr(lloc_last_error(), "bogus") != NULL);
  CHECK(lloc_config_load("/nonexistent/run.json", &config) == LLOC_ERR_IO);

  CHECK(lloc_config_parse(kConfig, &config) == LLOC_OK);
  CHECK(strlen(lloc_last_error()) == 0);
  CHECK(lloc_config_get_output(config, buffer, sizeof buffer) == LLOC_OK);
  CHECK(strcmp(buffer, "smoke_out") == 0);
  CHECK(lloc_config_get_output(config, buffer, 3) == LLOC_ERR_INVALID_ARGUMENT);
  {
    const size_t bad[] = {1, 0};
    const size_t good[] = {1, 10};
    CHECK(lloc_config_set_intervals(config, bad, 2) == LLOC_ERR_CONFIG);
    CHECK(lloc_config_set_intervals(config, good, 2) == LLOC_OK);
  }
  CHECK(lloc_config_set_backend(config, (lloc_backend)7) == LLOC_ERR_CONFIG);
  CHECK(lloc_config_set_threads(config, -1) == LLOC_ERR_CONFIG);
  CHECK(lloc_config_frame_count(config, &frames) == LLOC_OK);
  CHECK(frames == 30);

  snprintf(path, sizeof path, "%s/c_api_smoke_missing", dir);
  CHECK(lloc_config_set_output(config, path) == LLOC_OK);
  CHECK(lloc_sweep(config, NULL) == LLOC_ERR_IO);
  CHECK(strstr(lloc_last_error(), "teach") != NULL);
  lloc_config_free(config);

  {
    const double runtime[] = {10.0, 5.0, 2.0};
    const double error[] = {0.10, 0.15, 0.80};
    size_t knee = 99;
    CHECK(lloc_knee_point(runtime, error, 3, &knee) == LLOC_OK);
    CHECK(knee == 1);
    CHECK(lloc_knee_point(runtime, error, 0, &knee) != LLOC_OK);
  }
  {
    const double truth[12] = {1, 0, 0, 5, 0, 1, 0, 2, 0, 0, 1, 1};
    const double estimate[12] = {1, 0, 0, 5, 0, 1, 0, 2.25, 0, 0, 1, 1};
    double e[6];
    CHECK(lloc_pose_error(estimate, truth, e) == LLOC_OK);
    CHECK(fabs(e[0] - 0.25) < 1e-12);
    CHECK(fabs(e[1]) < 1e-12 && fabs(e[5]) < 1e-12);
  }
  {
    lloc_results* results = NULL;
    lloc_result_row row;
    char* summary = NULL;
    FILE* f;
    snprintf(path, sizeof path, "%s/c_api_smoke.csv", dir);
    f = fopen(path, "w");
    CHECK(f != NULL);
    if (f) {
      fputs("route,backend,n,runtime_ms,rt_ratio,lat_m,lon_m,vert_m,roll_deg,pitch_deg,head_deg,"
            "knee_flag\n", f);
      fputs("r,doppler,1,10,0.1,0.10,0.1,0.1,0.1,0.1,0.1,-\n", f);
      fputs("r,doppler,2,5,0.05,0.15,0.1,0.1,0.1,0.1,0.1,-\n", f);
      fputs("r,doppler,5,2,0.02,0.80,0.1,0.1,0.1,0.1,0.1,-\n", f);
      fclose(f);
    }
    CHECK(lloc_results_read(path, &results) == LLOC_OK);
    CHECK(lloc_results_count(results) == 3);
    CHECK(lloc_results_row(results, 1, &row) == LLOC_OK);
    CHECK(row.interval == 2 && strstr(row.knee_flag, "lat") != NULL);
    CHECK(lloc_results_row(results, 3, &row) == LLOC_ERR_INVALID_ARGUMENT);
    lloc_results_free(results);

    snprintf(buffer, sizeof buffer, "%s/c_api_smoke_report", dir);
    CHECK(lloc_report(path, buffer, &summary) == LLOC_OK);
    CHECK(summary != NULL && strstr(summary, "lateral: knee at n=2") != NULL);
    lloc_string_free(summary);
    CHECK(lloc_report("/nonexistent.csv", buffer, NULL) == LLOC_ERR_IO);
  }

  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  puts("c api smoke: ok");
  return 0;
}
