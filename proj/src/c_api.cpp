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


#include "lidarloc/lidarloc.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <iostream>
#include <new>
#include <string>
#include <vector>

#include "lidarloc/bench.hpp"
#include "lidarloc/error.hpp"

struct lloc_config {
  lidarloc::RunConfig config;
};

struct lloc_results {
  std::vector<lidarloc::SweepResult> rows;
  std::vector<std::string> knee_flags;
};

namespace {

thread_local std::string last_error;

lloc_status StatusOf(lidarloc::ErrorCode code) {
  using lidarloc::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return LLOC_ERR_INVALID_ARGUMENT;
    case ErrorCode::kDomain: return LLOC_ERR_DOMAIN;
    case ErrorCode::kInsufficientData: return LLOC_ERR_INSUFFICIENT_DATA;
    case ErrorCode::kRankDeficient: return LLOC_ERR_RANK_DEFICIENT;
    case ErrorCode::kDegenerateFit: return LLOC_ERR_DEGENERATE_FIT;
    case ErrorCode::kGraphIntegrity: return LLOC_ERR_GRAPH_INTEGRITY;
    case ErrorCode::kConfig: return LLOC_ERR_CONFIG;
    case ErrorCode::kIo: return LLOC_ERR_IO;
    case ErrorCode::kEstimation: return LLOC_ERR_ESTIMATION;
  }
  return LLOC_ERR_INTERNAL;
}

template <typename F>
lloc_status Guard(F&& body) {
  try {
    last_error.clear();
    body();
    return LLOC_OK;
  } catch (const lidarloc::Error& e) {
    last_error = e.what();
    return StatusOf(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return LLOC_ERR_IO;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return LLOC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return LLOC_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return LLOC_ERR_INTERNAL;
  }
}

void Require(bool ok, const char* what) {
  if (!ok) throw lidarloc::InvalidArgumentError(what);
}

lloc_results* MakeResults(std::vector<lidarloc::SweepResult> rows) {
  auto* r = new lloc_results;
  r->knee_flags = lidarloc::knee_flags(rows);
  r->rows = std::move(rows);
  return r;
}

}  // namespace

extern "C" {

const char* lloc_last_error(void) { return last_error.c_str(); }

const char* lloc_version(void) { return "0.1.0"; }

const char* lloc_status_name(lloc_status status) {
  switch (status) {
    case LLOC_OK: return "ok";
    case LLOC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LLOC_ERR_DOMAIN: return "domain error";
    case LLOC_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case LLOC_ERR_RANK_DEFICIENT: return "rank deficient";
    case LLOC_ERR_DEGENERATE_FIT: return "degenerate fit";
    case LLOC_ERR_GRAPH_INTEGRITY: return "graph integrity";
    case LLOC_ERR_CONFIG: return "config error";
    case LLOC_ERR_IO: return "i/o error";
    case LLOC_ERR_ESTIMATION: return "estimation failure";
    case LLOC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

lloc_status lloc_config_load(const char* path, lloc_config** out) {
  return Guard([&] {
    Require(path && out, "lloc_config_load: null argument");
    *out = nullptr;
    auto* c = new lloc_config{lidarloc::load_run_config(path)};
    *out = c;
  });
}

lloc_status lloc_config_parse(const char* json_text, lloc_config** out) {
  return Guard([&] {
    Require(json_text && out, "lloc_config_parse: null argument");
    *out = nullptr;
    auto* c = new lloc_config{lidarloc::parse_run_config(json_text)};
    *out = c;
  });
}

void lloc_config_free(lloc_config* config) { delete config; }

lloc_status lloc_config_set_intervals(lloc_config* config, const size_t* intervals,
                                      size_t count) {
  return Guard([&] {
    Require(config && (intervals || count == 0), "lloc_config_set_intervals: null argument");
    std::vector<std::size_t> values(intervals, intervals + count);
    if (values.empty()) throw lidarloc::ConfigError("intervals: must not be empty");
    for (std::size_t n : values) {
      if (n < 1) throw lidarloc::ConfigError("intervals: every interval must be at least 1");
    }
    config->config.intervals = std::move(values);
  });
}

lloc_status lloc_config_set_backend(lloc_config* config, lloc_backend backend) {
  return Guard([&] {
    Require(config, "lloc_config_set_backend: null config");
    switch (backend) {
      case LLOC_BACKEND_DOPPLER: config->config.backend = lidarloc::BackendSelection::kDoppler; break;
      case LLOC_BACKEND_ICP: config->config.backend = lidarloc::BackendSelection::kIcp; break;
      case LLOC_BACKEND_BOTH: config->config.backend = lidarloc::BackendSelection::kBoth; break;
      default: throw lidarloc::ConfigError("backend: unknown value");
    }
  });
}

lloc_status lloc_config_set_seed(lloc_config* config, uint64_t seed) {
  return Guard([&] {
    Require(config, "lloc_config_set_seed: null config");
    config->config.seed = seed;
  });
}

lloc_status lloc_config_set_threads(lloc_config* config, int threads) {
  return Guard([&] {
    Require(config, "lloc_config_set_threads: null config");
    if (threads < 0) throw lidarloc::ConfigError("threads: must be non-negative");
    config->config.threads = threads;
  });
}

lloc_status lloc_config_set_serial_timing(lloc_config* config, int enabled) {
  return Guard([&] {
    Require(config, "lloc_config_set_serial_timing: null config");
    config->config.serial_timing = enabled != 0;
  });
}

lloc_status lloc_config_set_output(lloc_config* config, const char* directory) {
  return Guard([&] {
    Require(config && directory, "lloc_config_set_output: null argument");
    if (*directory == '\0') throw lidarloc::ConfigError("output: must not be empty");
    config->config.output = directory;
  });
}

lloc_status lloc_config_get_output(const lloc_config* config, char* buffer, size_t size) {
  return Guard([&] {
    Require(config && buffer, "lloc_config_get_output: null argument");
    const std::string s = config->config.output.string();
    Require(s.size() < size, "lloc_config_get_output: buffer too small");
    std::memcpy(buffer, s.c_str(), s.size() + 1);
  });
}

lloc_status lloc_config_frame_count(const lloc_config* config, size_t* frames) {
  return Guard([&] {
    Require(config && frames, "lloc_config_frame_count: null argument");
    *frames = lidarloc::Scenario(config->config.route, config->config.seed).frame_count();
  });
}

lloc_status lloc_teach(const lloc_config* config, size_t* vertex_count) {
  return Guard([&] {
    Require(config, "lloc_teach: null config");
    const lidarloc::RunConfig& c = config->config;
    const lidarloc::Scenario scenario(c.route, c.seed);
    const lidarloc::PoseGraph graph = lidarloc::run_teach(c, scenario);
    lidarloc::write_graph(c.output / lidarloc::kGraphDirectory, graph);
    if (vertex_count) *vertex_count = graph.teach_ids().size();
  });
}

lloc_status lloc_sweep(const lloc_config* config, lloc_results** out) {
  return Guard([&] {
    Require(config, "lloc_sweep: null config");
    if (out) *out = nullptr;
    const lidarloc::RunConfig& c = config->config;
    const std::filesystem::path graph_dir = c.output / lidarloc::kGraphDirectory;
    if (!std::filesystem::exists(graph_dir / lidarloc::kGraphFileName)) {
      throw lidarloc::IoError("no teach graph in " + graph_dir.string() +
                              "; run teach with the same config first");
    }
    const lidarloc::PoseGraph graph = lidarloc::read_graph(graph_dir, c.icp.k_neighbors);
    const lidarloc::Scenario scenario(c.route, c.seed);
    const std::vector<lidarloc::SweepCell> cells = lidarloc::run_sweep(c, scenario, graph);
    std::vector<lidarloc::SweepResult> rows;
    for (const lidarloc::SweepCell& cell : cells) {
      rows.push_back(cell.result);
      lidarloc::write_trajectory(c.output / ("traj_" + cell.result.route + "_" +
                                             cell.result.backend + "_n" +
                                             std::to_string(cell.interval) + ".csv"),
                                 scenario, cell);
    }
    lidarloc::write_results_csv(c.output / lidarloc::kResultsFileName, rows);
    if (out) *out = MakeResults(std::move(rows));
  });
}

lloc_status lloc_results_read(const char* csv_path, lloc_results** out) {
  return Guard([&] {
    Require(csv_path && out, "lloc_results_read: null argument");
    *out = nullptr;
    *out = MakeResults(lidarloc::read_results_csv(csv_path));
  });
}

size_t lloc_results_count(const lloc_results* results) {
  return results ? results->rows.size() : 0;
}

lloc_status lloc_results_row(const lloc_results* results, size_t index, lloc_result_row* row) {
  return Guard([&] {
    Require(results && row, "lloc_results_row: null argument");
    Require(index < results->rows.size(), "lloc_results_row: index out of range");
    const lidarloc::SweepResult& r = results->rows[index];
    row->route = r.route.c_str();
    row->backend = r.backend.c_str();
    row->interval = r.interval;
    row->runtime_ms = r.runtime_ms;
    row->rt_ratio = r.rt_ratio;
    row->lateral_m = r.rmse.lateral;
    row->longitudinal_m = r.rmse.longitudinal;
    row->vertical_m = r.rmse.vertical;
    row->roll_deg = r.rmse.roll;
    row->pitch_deg = r.rmse.pitch;
    row->heading_deg = r.rmse.heading;
    row->knee_flag = results->knee_flags[index].c_str();
  });
}

void lloc_results_free(lloc_results* results) { delete results; }

lloc_status lloc_report(const char* csv_path, const char* directory, char** summary) {
  return Guard([&] {
    Require(csv_path && directory, "lloc_report: null argument");
    if (summary) *summary = nullptr;
    const std::string text =
        lidarloc::write_report(directory, lidarloc::read_results_csv(csv_path));
    if (summary) {
      char* copy = static_cast<char*>(std::malloc(text.size() + 1));
      if (!copy) throw std::bad_alloc();
      std::memcpy(copy, text.c_str(), text.size() + 1);
      *summary = copy;
    }
  });
}

void lloc_string_free(char* text) { std::free(text); }

lloc_status lloc_knee_point(const double* runtime_ms, const double* error, size_t count,
                            size_t* index) {
  return Guard([&] {
    Require(index && (count == 0 || (runtime_ms && error)), "lloc_knee_point: null argument");
    std::vector<lidarloc::CurvePoint> points(count);
    for (std::size_t i = 0; i < count; ++i) points[i] = {runtime_ms[i], error[i]};
    *index = lidarloc::knee_point(points);
  });
}

lloc_status lloc_pose_error(const double estimate[12], const double truth[12], double out[6]) {
  return Guard([&] {
    Require(estimate && truth && out, "lloc_pose_error: null argument");
    const auto e = lidarloc::pose_error(
        lidarloc::Pose::FromRowMajor(std::span<const double, 12>(estimate, 12)),
        lidarloc::Pose::FromRowMajor(std::span<const double, 12>(truth, 12)));
    out[0] = e.lateral;
    out[1] = e.longitudinal;
    out[2] = e.vertical;
    out[3] = e.roll;
    out[4] = e.pitch;
    out[5] = e.heading;
  });
}

}  // extern "C"
