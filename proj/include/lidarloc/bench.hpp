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


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lidarloc/eval.hpp"
#include "lidarloc/simulator.hpp"
#include "lidarloc/teach_repeat.hpp"

namespace lidarloc {

enum class BackendSelection { kDoppler, kIcp, kBoth };
/// Accepts "doppler", "icp" or "both"; throws ConfigError.
BackendSelection parse_backend_selection(const std::string& name);
std::vector<Backend> backends_of(BackendSelection selection);

/// Simulated route: piecewise-constant twists driven from `start`. The repeat
/// pass drives the same twists from `start` shifted by `repeat_offset` in the
/// start vehicle frame. The street world is generated along the route
/// extended by `world_margin` seconds of its last twist.
struct RouteSpec {
  std::string name = "route";
  Pose start = Pose::FromTranslation({0, 0, 1.0});
  std::vector<std::pair<double, Twist>> segments;
  Eigen::Vector3d repeat_offset = Eigen::Vector3d(0, 0.3, 0);
  double world_margin = 4.0;  // s
  StreetWorldOptions world;
  std::uint64_t world_seed = 3;
  SensorSpec sensor;
  /// Frames per pass; 0 uses every whole frame the route covers.
  std::size_t frames = 0;

  void Validate() const;
};

struct RunConfig {
  RouteSpec route;
  BackendSelection backend = BackendSelection::kBoth;
  std::vector<std::size_t> intervals = {1, 2, 5, 10, 15, 25, 50};
  VertexThresholds thresholds;
  DopplerConfig doppler;
  IcpConfig icp;
  LocalizeConfig localize;
  /// Range-bias model the Doppler pipeline corrects with; unset uses the
  /// simulated sensor's exact bias.
  std::optional<DopplerBiasModel> doppler_bias;
  std::filesystem::path output = "out";
  std::uint64_t seed = 1;
  /// Point-parallel workers; 0 selects 1 for Doppler and 10 for ICP, capped
  /// at the processor count.
  int threads = 0;
  bool serial_timing = false;

  /// Throws ConfigError naming the offending field.
  void Validate() const;
};

/// Parses a JSON run configuration. Unknown keys and type mismatches throw
/// ConfigError naming the key path. A string-valued "route" is read as a
/// path relative to `base_directory`.
RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_directory = {});
/// Throws IoError when the file cannot be read.
RunConfig load_run_config(const std::filesystem::path& path);

/// Ground truth, world and rendered frames for one route and seed.
class Scenario {
 public:
  Scenario(const RouteSpec& route, std::uint64_t seed);

  const GroundTruth& teach_truth() const { return teach_truth_; }
  const GroundTruth& repeat_truth() const { return repeat_truth_; }
  const WorldSpec& world() const { return world_; }
  const RouteSpec& route() const { return route_; }
  std::size_t frame_count() const { return frame_count_; }
  double frame_period() const { return route_.sensor.frame_period(); }

  /// Frames render on demand and depend only on the seed and index.
  FrameSource teach_source() const;
  FrameSource repeat_source() const;
  /// Truth vehicle-to-map pose at the end of frame `index`.
  Pose teach_pose(std::size_t index) const;
  Pose repeat_pose(std::size_t index) const;

 private:
  RouteSpec route_;
  std::uint64_t seed_;
  GroundTruth teach_truth_;
  GroundTruth repeat_truth_;
  WorldSpec world_;
  std::size_t frame_count_ = 0;
};

/// Worker count used for `backend` under `config.threads`.
int effective_threads(const RunConfig& config, Backend backend);

/// Teach pass over the scenario with the configured ICP settings.
PoseGraph run_teach(const RunConfig& config, const Scenario& scenario);

/// Per-frame errors against the vertex-relative truth: the estimate is the
/// true vertex pose composed with the estimated T_{m,r}.
std::vector<ComponentError> repeat_errors(const Scenario& scenario, const RepeatResult& result);

struct SweepCell {
  Backend backend = Backend::kDoppler;
  std::size_t interval = 1;
  SweepResult result;
  std::vector<ComponentError> errors;
  RepeatResult run;
};

/// Runs every (backend, interval) cell against `graph`. Cells run
/// concurrently unless `config.serial_timing` is set or one worker is
/// available; then they take turns frame by frame on a shared rendered
/// frame. Estimates are deterministic for a fixed seed and thread count.
std::vector<SweepCell> run_sweep(const RunConfig& config, const Scenario& scenario,
                                 const PoseGraph& graph);

/// Knee flags per row: component short names joined by '|' for every
/// component whose knee (within the row's route and backend) is that row,
/// or "-" when none.
std::vector<std::string> knee_flags(const std::vector<SweepResult>& rows);

inline constexpr const char* kResultsHeader =
    "route,backend,n,runtime_ms,rt_ratio,lat_m,lon_m,vert_m,roll_deg,pitch_deg,head_deg,"
    "knee_flag";

void write_results_csv(const std::filesystem::path& path, const std::vector<SweepResult>& rows);
/// Throws IoError naming the line on malformed input and on an empty file.
std::vector<SweepResult> read_results_csv(const std::filesystem::path& path);

/// Per-frame trajectory and error file of one sweep cell.
void write_trajectory(const std::filesystem::path& path, const Scenario& scenario,
                      const SweepCell& cell);

/// Writes pareto_<route>_<backend>_<component>.csv curves and
/// knee_summary.txt into `directory`; returns the summary text.
std::string write_report(const std::filesystem::path& directory,
                         const std::vector<SweepResult>& rows);

/// Short CSV name of a component: lat, lon, vert, roll, pitch, head.
const char* component_short_name(Component component);

inline constexpr const char* kGraphDirectory = "graph";
inline constexpr const char* kResultsFileName = "results.csv";

}  // namespace lidarloc
