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


#include "lidarloc/bench.hpp"

#include <omp.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lidarloc/error.hpp"

namespace lidarloc {
namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr int kDefaultIcpThreads = 10;

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(Where() + ": expected an object");
  }

  std::string Key(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* Find(const std::string& key) {
    seen_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  void Number(const std::string& key, double& out) {
    if (const json* v = Find(key)) {
      if (!v->is_number()) throw ConfigError(Key(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  void Integer(const std::string& key, int& out) {
    if (const json* v = Find(key)) {
      if (!v->is_number_integer()) throw ConfigError(Key(key) + ": expected an integer");
      out = v->get<int>();
    }
  }

  void Count(const std::string& key, std::size_t& out) {
    if (const json* v = Find(key)) out = AsCount(*v, Key(key));
  }

  void Seed(const std::string& key, std::uint64_t& out) {
    if (const json* v = Find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(Key(key) + ": expected an unsigned integer");
      out = v->get<std::uint64_t>();
    }
  }

  void Bool(const std::string& key, bool& out) {
    if (const json* v = Find(key)) {
      if (!v->is_boolean()) throw ConfigError(Key(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void String(const std::string& key, std::string& out) {
    if (const json* v = Find(key)) {
      if (!v->is_string()) throw ConfigError(Key(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  template <int N>
  void Vector(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    if (const json* v = Find(key)) out = AsVector<N>(*v, Key(key));
  }

  /// Diagonal covariance from N variances.
  template <int N>
  void Diagonal(const std::string& key, Eigen::Matrix<double, N, N>& out) {
    if (const json* v = Find(key)) out = AsVector<N>(*v, Key(key)).asDiagonal();
  }

  void Finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(Key(it.key()) + ": unknown key");
    }
  }

  static std::size_t AsCount(const json& v, const std::string& where) {
    if (!v.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
    return v.get<std::size_t>();
  }

  template <int N>
  static Eigen::Matrix<double, N, 1> AsVector(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != static_cast<std::size_t>(N)) {
      throw ConfigError(where + ": expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) {
        throw ConfigError(where + "[" + std::to_string(i) + "]: expected a number");
      }
      out(i) = v[static_cast<std::size_t>(i)].get<double>();
    }
    return out;
  }

 private:
  std::string Where() const { return path_.empty() ? "config" : path_; }

  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

// {"translation": [x, y, z], "rpy_deg": [roll, pitch, yaw]} with rotation
// Rz(yaw) Ry(pitch) Rx(roll).
Pose ReadPose(const json& v, const std::string& where) {
  ObjectReader r(v, where);
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
  r.Vector<3>("translation", t);
  r.Vector<3>("rpy_deg", rpy);
  r.Finish();
  rpy *= kDegToRad;
  const Eigen::Matrix3d R = (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  return Pose(R, t);
}

void ReadWorld(const json& v, const std::string& where, RouteSpec& route) {
  ObjectReader r(v, where);
  StreetWorldOptions& w = route.world;
  r.Seed("seed", route.world_seed);
  r.Number("setback_min", w.setback_min);
  r.Number("setback_max", w.setback_max);
  r.Number("spacing", w.spacing);
  r.Number("building_length_min", w.building_length_min);
  r.Number("building_length_max", w.building_length_max);
  r.Number("building_height_min", w.building_height_min);
  r.Number("building_height_max", w.building_height_max);
  r.Number("gap_probability", w.gap_probability);
  r.Integer("dynamic_objects", w.dynamic_objects);
  r.Number("dynamic_speed", w.dynamic_speed);
  r.Finish();
}

void ReadSensor(const json& v, const std::string& where, SensorSpec& s) {
  ObjectReader r(v, where);
  r.Number("horizontal_fov_deg", s.horizontal_fov_deg);
  r.Number("vertical_fov_deg", s.vertical_fov_deg);
  r.Number("scan_rate_hz", s.scan_rate_hz);
  r.Integer("rows", s.rows);
  r.Integer("columns", s.columns);
  r.Number("max_range", s.max_range);
  r.Number("min_range", s.min_range);
  r.Number("doppler_noise", s.doppler_noise);
  r.Number("range_noise", s.range_noise);
  r.Number("bias_slope", s.bias_slope);
  r.Number("bias_intercept", s.bias_intercept);
  r.Number("gyro_rate_hz", s.gyro_rate_hz);
  r.Number("gyro_noise", s.gyro_noise);
  r.Vector<3>("gyro_bias", s.gyro_bias);
  if (const json* p = r.Find("T_vehicle_sensor")) {
    s.T_vehicle_sensor = ReadPose(*p, r.Key("T_vehicle_sensor"));
  }
  r.Finish();
}

RouteSpec ReadRoute(const json& v, const std::string& where) {
  RouteSpec route;
  ObjectReader r(v, where);
  r.String("name", route.name);
  if (const json* p = r.Find("start")) route.start = ReadPose(*p, r.Key("start"));
  if (const json* segs = r.Find("segments")) {
    if (!segs->is_array()) throw ConfigError(r.Key("segments") + ": expected an array");
    for (std::size_t i = 0; i < segs->size(); ++i) {
      const std::string key = r.Key("segments") + "[" + std::to_string(i) + "]";
      ObjectReader sr((*segs)[i], key);
      double duration = 0.0;
      Twist twist = Twist::Zero();
      if (!sr.Find("duration")) throw ConfigError(key + ".duration: required");
      sr.Number("duration", duration);
      sr.Vector<6>("twist", twist);
      sr.Finish();
      route.segments.emplace_back(duration, twist);
    }
  }
  r.Vector<3>("repeat_offset", route.repeat_offset);
  r.Number("world_margin", route.world_margin);
  r.Count("frames", route.frames);
  if (const json* p = r.Find("world")) ReadWorld(*p, r.Key("world"), route);
  if (const json* p = r.Find("sensor")) ReadSensor(*p, r.Key("sensor"), route.sensor);
  r.Finish();
  return route;
}

void ReadDoppler(const json& v, const std::string& where, DopplerConfig& c) {
  ObjectReader r(v, where);
  r.Diagonal<6>("Qc", c.Qc);
  r.Diagonal<4>("Qz", c.Qz);
  r.Number("R_dop", c.R_dop);
  r.Diagonal<3>("R_gyro", c.R_gyro);
  r.Vector<3>("gyro_bias", c.gyro_bias);
  r.Integer("ransac_iterations", c.ransac_iterations);
  r.Number("ransac_threshold", c.ransac_threshold);
  r.Seed("ransac_seed", c.ransac_seed);
  r.Number("forward_gate", c.forward_gate);
  r.Integer("integration_steps", c.integration_steps);
  r.Count("azimuth_bins", c.azimuth_bins);
  r.Count("elevation_bins", c.elevation_bins);
  r.Finish();
}

void ReadIcp(const json& v, const std::string& where, IcpConfig& c) {
  ObjectReader r(v, where);
  r.Diagonal<6>("Qc", c.Qc);
  r.Diagonal<3>("R_icp", c.R_icp);
  r.Number("normal_epsilon", c.normal_epsilon);
  r.Diagonal<3>("R_gyro", c.R_gyro);
  r.Vector<3>("gyro_bias", c.gyro_bias);
  r.Bool("use_gyro", c.use_gyro);
  r.Integer("max_iterations", c.max_iterations);
  r.Number("pose_tolerance", c.pose_tolerance);
  r.Number("twist_tolerance", c.twist_tolerance);
  r.Number("divergence_rise", c.divergence_rise);
  r.Number("max_correspondence_distance", c.max_correspondence_distance);
  r.Number("outlier_gate_sigmas", c.outlier_gate_sigmas);
  r.Number("min_outlier_gate", c.min_outlier_gate);
  r.Count("min_correspondences", c.min_correspondences);
  r.Count("map_span", c.map_span);
  r.Number("voxel_size", c.voxel_size);
  r.Count("k_neighbors", c.k_neighbors);
  r.Number("planarity_threshold", c.planarity_threshold);
  r.Finish();
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json ParseJson(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

void Check(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::string FormatDouble(double v, const char* format) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double ParseField(const std::string& field, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw IoError(where + ": '" + field + "' is not a number");
  }
  return v;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

// Rows of one route and backend, keyed in first-appearance order.
std::vector<std::vector<std::size_t>> GroupRows(const std::vector<SweepResult>& rows) {
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto key = std::make_pair(rows[i].route, rows[i].backend);
    const auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

const char* ComponentUnit(Component c) {
  switch (c) {
    case Component::kLateral:
    case Component::kLongitudinal:
    case Component::kVertical:
      return "m";
    default:
      return "deg";
  }
}

}  // namespace

BackendSelection parse_backend_selection(const std::string& name) {
  if (name == "doppler") return BackendSelection::kDoppler;
  if (name == "icp") return BackendSelection::kIcp;
  if (name == "both") return BackendSelection::kBoth;
  throw ConfigError("backend: expected doppler, icp or both, got '" + name + "'");
}

std::vector<Backend> backends_of(BackendSelection selection) {
  switch (selection) {
    case BackendSelection::kDoppler: return {Backend::kDoppler};
    case BackendSelection::kIcp: return {Backend::kIcp};
    case BackendSelection::kBoth: return {Backend::kDoppler, Backend::kIcp};
  }
  return {};
}

void RouteSpec::Validate() const {
  Check(!name.empty(), "route.name: must not be empty");
  Check(name.find_first_of(",/\\ \n") == std::string::npos,
        "route.name: must not contain commas, slashes or whitespace");
  Check(!segments.empty(), "route.segments: at least one segment is required");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    Check(segments[i].first > 0.0 && std::isfinite(segments[i].first),
          "route.segments[" + std::to_string(i) + "].duration: must be positive");
    Check(segments[i].second.allFinite(),
          "route.segments[" + std::to_string(i) + "].twist: must be finite");
  }
  Check(repeat_offset.allFinite(), "route.repeat_offset: must be finite");
  Check(world_margin >= 0.0, "route.world_margin: must be non-negative");
  try {
    sensor.Validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("route.sensor: ") + e.what());
  }
}

void RunConfig::Validate() const {
  route.Validate();
  Check(!intervals.empty(), "intervals: must not be empty");
  for (std::size_t n : intervals) Check(n >= 1, "intervals: every interval must be at least 1");
  Check(threads >= 0, "threads: must be non-negative");
  try {
    thresholds.Validate();
    doppler.Validate();
    icp.Validate();
    localize.Validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_directory) {
  const json root = ParseJson(text, "config");
  RunConfig config;
  ObjectReader r(root, "");
  if (const json* v = r.Find("route")) {
    if (v->is_string()) {
      const std::filesystem::path path = base_directory / v->get<std::string>();
      config.route = ReadRoute(ParseJson(ReadFile(path), path.string()), "route");
    } else {
      config.route = ReadRoute(*v, "route");
    }
  }
  std::string backend;
  r.String("backend", backend);
  if (!backend.empty()) config.backend = parse_backend_selection(backend);
  if (const json* v = r.Find("intervals")) {
    if (!v->is_array()) throw ConfigError("intervals: expected an array");
    config.intervals.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      config.intervals.push_back(
          ObjectReader::AsCount((*v)[i], "intervals[" + std::to_string(i) + "]"));
    }
  }
  if (const json* v = r.Find("teach")) {
    ObjectReader tr(*v, "teach");
    tr.Number("translation", config.thresholds.translation);
    double rotation_deg = config.thresholds.rotation / kDegToRad;
    tr.Number("rotation_deg", rotation_deg);
    config.thresholds.rotation = rotation_deg * kDegToRad;
    tr.Finish();
  }
  if (const json* v = r.Find("doppler")) ReadDoppler(*v, "doppler", config.doppler);
  if (const json* v = r.Find("icp")) ReadIcp(*v, "icp", config.icp);
  config.localize.icp = config.icp;
  if (const json* v = r.Find("localize")) {
    ObjectReader lr(*v, "localize");
    lr.Diagonal<6>("Q_prior", config.localize.Q_prior);
    if (const json* icp = lr.Find("icp")) ReadIcp(*icp, "localize.icp", config.localize.icp);
    lr.Finish();
  }
  if (const json* v = r.Find("doppler_bias")) {
    ObjectReader br(*v, "doppler_bias");
    DopplerBiasModel model;
    br.Number("slope", model.slope);
    br.Number("intercept", model.intercept);
    br.Finish();
    config.doppler_bias = model;
  }
  std::string output;
  r.String("output", output);
  if (!output.empty()) config.output = output;
  r.Seed("seed", config.seed);
  r.Integer("threads", config.threads);
  r.Bool("serial_timing", config.serial_timing);
  r.Finish();

  config.doppler.T_vehicle_sensor = config.route.sensor.T_vehicle_sensor;
  config.icp.T_vehicle_sensor = config.route.sensor.T_vehicle_sensor;
  config.localize.icp.T_vehicle_sensor = config.route.sensor.T_vehicle_sensor;
  config.Validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(ReadFile(path), path.parent_path());
}

Scenario::Scenario(const RouteSpec& route, std::uint64_t seed) : route_(route), seed_(seed) {
  route_.Validate();
  auto segments = segments_from_durations(route_.segments);
  teach_truth_ = build_trajectory(route_.start, segments);
  repeat_truth_ =
      build_trajectory(route_.start * Pose::FromTranslation(route_.repeat_offset), segments);
  auto extended = segments;
  extended.back().t_end += route_.world_margin;
  world_ = generate_street_world(build_trajectory(route_.start, extended), route_.world,
                                 route_.world_seed);
  const double period = frame_period();
  const std::size_t available = static_cast<std::size_t>(
      std::floor((teach_truth_.t_end() - teach_truth_.t_begin()) / period + 1e-9));
  frame_count_ = route_.frames == 0 ? available : route_.frames;
  if (frame_count_ < 2 || frame_count_ > available) {
    throw ConfigError("route.frames: the route covers " + std::to_string(available) +
                      " frames; at least 2 are required");
  }
}

FrameSource Scenario::teach_source() const {
  return [this](std::size_t i) {
    const double t0 = teach_truth_.t_begin() + frame_period() * static_cast<double>(i);
    const std::uint64_t s = (seed_ << 32) + 2 * i;
    return FrameInput{render_scan(world_, teach_truth_, t0, t0 + frame_period(), route_.sensor, s),
                      simulate_gyro(teach_truth_, route_.sensor, t0, t0 + frame_period(), s)};
  };
}

FrameSource Scenario::repeat_source() const {
  return [this](std::size_t i) {
    const double t0 = repeat_truth_.t_begin() + frame_period() * static_cast<double>(i);
    const std::uint64_t s = (seed_ << 32) + 2 * i + 1;
    return FrameInput{
        render_scan(world_, repeat_truth_, t0, t0 + frame_period(), route_.sensor, s),
        simulate_gyro(repeat_truth_, route_.sensor, t0, t0 + frame_period(), s)};
  };
}

Pose Scenario::teach_pose(std::size_t index) const {
  return teach_truth_.pose(teach_truth_.t_begin() + frame_period() * static_cast<double>(index + 1));
}

Pose Scenario::repeat_pose(std::size_t index) const {
  return repeat_truth_.pose(repeat_truth_.t_begin() +
                            frame_period() * static_cast<double>(index + 1));
}

int effective_threads(const RunConfig& config, Backend backend) {
  if (config.threads > 0) return config.threads;
  if (backend == Backend::kDoppler) return 1;
  return std::max(1, std::min(kDefaultIcpThreads, omp_get_num_procs()));
}

PoseGraph run_teach(const RunConfig& config, const Scenario& scenario) {
  const int previous = omp_get_max_threads();
  omp_set_num_threads(effective_threads(config, Backend::kIcp));
  try {
    PoseGraph graph = teach(scenario.teach_source(), scenario.frame_count(), config.icp,
                            config.thresholds, scenario.teach_pose(0));
    omp_set_num_threads(previous);
    return graph;
  } catch (...) {
    omp_set_num_threads(previous);
    throw;
  }
}

std::vector<ComponentError> repeat_errors(const Scenario& scenario, const RepeatResult& result) {
  std::vector<ComponentError> errors;
  errors.reserve(result.frames.size());
  for (const RepeatFrame& f : result.frames) {
    const Pose vertex_truth = scenario.teach_truth().pose(result.graph.vertex(f.vertex).stamp);
    const Pose estimate = vertex_truth * f.T_r_m.inverse();
    errors.push_back(pose_error(estimate, scenario.repeat_truth().pose(f.stamp)));
  }
  return errors;
}

std::vector<SweepCell> run_sweep(const RunConfig& config, const Scenario& scenario,
                                 const PoseGraph& graph) {
  std::vector<SweepCell> cells;
  for (Backend b : backends_of(config.backend)) {
    for (std::size_t n : config.intervals) {
      SweepCell cell;
      cell.backend = b;
      cell.interval = n;
      cells.push_back(std::move(cell));
    }
  }
  auto repeat_config = [&](const SweepCell& cell) {
    RepeatConfig rc;
    rc.interval = cell.interval;
    rc.backend = cell.backend;
    rc.doppler = config.doppler;
    rc.doppler_bias = config.doppler_bias.value_or(
        DopplerBiasModel{config.route.sensor.bias_slope, config.route.sensor.bias_intercept});
    rc.icp = config.icp;
    rc.localize = config.localize;
    rc.initial_pose = scenario.repeat_pose(0);
    rc.threads = effective_threads(config, cell.backend);
    return rc;
  };
  auto summarize = [&](SweepCell& cell) {
    cell.errors = repeat_errors(scenario, cell.run);
    double runtime = 0.0;
    for (const RepeatFrame& f : cell.run.frames) runtime += f.runtime;
    SweepResult& r = cell.result;
    r.route = config.route.name;
    r.backend = backend_name(cell.backend);
    r.interval = cell.interval;
    r.rmse = rmse(cell.errors);
    r.runtime_ms = 1000.0 * runtime / static_cast<double>(cell.run.frames.size());
    r.rt_ratio = realtime_ratio(r.runtime_ms, scenario.frame_period());
  };

  const std::size_t workers =
      config.serial_timing
          ? 1
          : std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                           cells.size()));
  if (workers == 1) {
    // One cell at a time per frame, so slow drift in machine speed reaches
    // every cell alike. Each frame renders once for all cells.
    std::vector<RepeatSession> sessions;
    for (const SweepCell& cell : cells) sessions.emplace_back(graph, repeat_config(cell));
    const FrameSource source = scenario.repeat_source();
    for (std::size_t i = 0; i < scenario.frame_count(); ++i) {
      const FrameInput input = source(i);
      for (std::size_t k = 0; k < sessions.size(); ++k) {
        sessions[i % 2 == 0 ? k : sessions.size() - 1 - k].Process(input);
      }
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      cells[k].run = sessions[k].Finish();
      summarize(cells[k]);
    }
    return cells;
  }
  auto run_cell = [&](SweepCell& cell) {
    cell.run = repeat(scenario.repeat_source(), scenario.frame_count(), graph, repeat_config(cell));
    summarize(cell);
  };
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        try {
          run_cell(cells[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return cells;
}

const char* component_short_name(Component component) {
  switch (component) {
    case Component::kLateral: return "lat";
    case Component::kLongitudinal: return "lon";
    case Component::kVertical: return "vert";
    case Component::kRoll: return "roll";
    case Component::kPitch: return "pitch";
    case Component::kHeading: return "head";
  }
  return "unknown";
}

std::vector<std::string> knee_flags(const std::vector<SweepResult>& rows) {
  std::vector<std::string> flags(rows.size());
  for (const auto& group : GroupRows(rows)) {
    for (Component c : kAllComponents) {
      std::vector<CurvePoint> points;
      for (std::size_t i : group) points.push_back({rows[i].runtime_ms, component_value(rows[i].rmse, c)});
      std::string& flag = flags[group[knee_point(points)]];
      if (!flag.empty()) flag += '|';
      flag += component_short_name(c);
    }
  }
  for (std::string& f : flags) {
    if (f.empty()) f = "-";
  }
  return flags;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<SweepResult>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const std::vector<std::string> flags = knee_flags(rows);
  os << kResultsHeader << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SweepResult& r = rows[i];
    os << r.route << ',' << r.backend << ',' << r.interval << ','
       << FormatDouble(r.runtime_ms, "%.4f") << ',' << FormatDouble(r.rt_ratio, "%.6f");
    for (Component c : kAllComponents) os << ',' << FormatDouble(component_value(r.rmse, c), "%.9g");
    os << ',' << flags[i] << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<SweepResult> read_results_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::string line;
  std::size_t line_number = 0;
  auto where = [&] { return path.string() + ":" + std::to_string(line_number); };
  if (!std::getline(is, line)) throw IoError(path.string() + ": empty input, no header or rows");
  ++line_number;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw IoError(where() + ": unexpected header");
  std::vector<SweepResult> rows;
  while (std::getline(is, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = SplitCsv(line);
    if (f.size() != 12) {
      throw IoError(where() + ": expected 12 fields, found " + std::to_string(f.size()));
    }
    SweepResult r;
    r.route = f[0];
    r.backend = f[1];
    if (r.route.empty() || r.backend.empty()) throw IoError(where() + ": empty route or backend");
    const double n = ParseField(f[2], where());
    if (n < 1.0 || n != std::floor(n)) throw IoError(where() + ": interval must be a positive integer");
    r.interval = static_cast<std::size_t>(n);
    r.runtime_ms = ParseField(f[3], where());
    r.rt_ratio = ParseField(f[4], where());
    r.rmse = {ParseField(f[5], where()), ParseField(f[6], where()), ParseField(f[7], where()),
              ParseField(f[8], where()), ParseField(f[9], where()), ParseField(f[10], where())};
    if (!(r.runtime_ms >= 0.0)) throw IoError(where() + ": runtime must be non-negative");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IoError(path.string() + ": empty input, no result rows");
  return rows;
}

void write_trajectory(const std::filesystem::path& path, const Scenario& scenario,
                      const SweepCell& cell) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "frame,stamp,vertex,attempted,localized,runtime_ms,x,y,z,true_x,true_y,true_z,"
        "lat_m,lon_m,vert_m,roll_deg,pitch_deg,head_deg\n";
  for (std::size_t i = 0; i < cell.run.frames.size(); ++i) {
    const RepeatFrame& f = cell.run.frames[i];
    const ComponentError& e = cell.errors[i];
    const Eigen::Vector3d truth = scenario.repeat_truth().pose(f.stamp).translation();
    os << f.index << ',' << FormatDouble(f.stamp, "%.6f") << ',' << f.vertex << ','
       << int{f.attempted} << ',' << int{f.localized} << ','
       << FormatDouble(1000.0 * f.runtime, "%.4f");
    for (int k = 0; k < 3; ++k) os << ',' << FormatDouble(f.map_pose.translation()(k), "%.9g");
    for (int k = 0; k < 3; ++k) os << ',' << FormatDouble(truth(k), "%.9g");
    for (Component c : kAllComponents) os << ',' << FormatDouble(component_value(e, c), "%.9g");
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

std::string write_report(const std::filesystem::path& directory,
                         const std::vector<SweepResult>& rows) {
  if (rows.empty()) throw IoError("no result rows to report");
  std::filesystem::create_directories(directory);
  std::ostringstream summary;
  for (const auto& group : GroupRows(rows)) {
    const SweepResult& first = rows[group.front()];
    std::vector<SweepResult> subset;
    for (std::size_t i : group) subset.push_back(rows[i]);
    summary << first.route << ' ' << first.backend << '\n';
    for (Component c : kAllComponents) {
      const std::vector<ParetoPoint> curve = assemble_pareto(subset, c);
      std::vector<CurvePoint> points;
      for (const ParetoPoint& p : curve) points.push_back({p.runtime_ms, p.error});
      const std::size_t knee = knee_point(points);
      const auto path = directory / ("pareto_" + first.route + "_" + first.backend + "_" +
                                     component_short_name(c) + ".csv");
      std::ofstream os(path, std::ios::binary);
      if (!os) throw IoError("cannot write " + path.string());
      os << "n,runtime_ms,rmse_" << ComponentUnit(c) << ",knee\n";
      for (std::size_t k = 0; k < curve.size(); ++k) {
        os << curve[k].interval << ',' << FormatDouble(curve[k].runtime_ms, "%.4f") << ','
           << FormatDouble(curve[k].error, "%.9g") << ',' << int{k == knee} << '\n';
      }
      if (!os) throw IoError("failed writing " + path.string());
      summary << "  " << component_name(c) << ": knee at n=" << curve[knee].interval << " ("
              << FormatDouble(curve[knee].runtime_ms, "%.2f") << " ms, "
              << FormatDouble(curve[knee].error, "%.4g") << ' ' << ComponentUnit(c) << ")\n";
    }
  }
  const auto path = directory / "knee_summary.txt";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << summary.str();
  return summary.str();
}

}  // namespace lidarloc
