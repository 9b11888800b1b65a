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

#include "lidarloc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "lidarloc/error.hpp"

namespace lidarloc {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kContiguityTolerance = 1e-9;

std::mt19937_64 MakeRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

struct Hit {
  double distance = std::numeric_limits<double>::infinity();
  Eigen::Vector3d surface_velocity = Eigen::Vector3d::Zero();
};

bool IntersectBox(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                  const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, double* distance) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir(a)) < 1e-15) {
      if (origin(a) < lo(a) || origin(a) > hi(a)) return false;
      continue;
    }
    double t0 = (lo(a) - origin(a)) / dir(a);
    double t1 = (hi(a) - origin(a)) / dir(a);
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return false;
  }
  if (t_near <= 0.0) return false;  // origin inside or box behind
  *distance = t_near;
  return true;
}

double DistanceToBox(const Eigen::Vector3d& p, const BoxPrimitive& b) {
  const Eigen::Vector3d clamped = p.cwiseMax(b.min_corner).cwiseMin(b.max_corner);
  return (p - clamped).norm();
}

}  // namespace

void WorldSpec::Validate() const {
  if (planes.empty() && boxes.empty()) {
    throw ConfigError("world: at least one static primitive (plane or box) is required");
  }
  auto check_box = [](const BoxPrimitive& b, const char* what) {
    if (!((b.max_corner - b.min_corner).array() > 0.0).all()) {
      throw ConfigError(std::string("world: ") + what + " must have positive extents");
    }
  };
  for (const auto& b : boxes) check_box(b, "boxes");
  for (const auto& d : dynamic_boxes) check_box(d.box, "dynamic_boxes");
  for (const auto& p : planes) {
    if (!(p.normal.norm() > 0.0)) throw ConfigError("world: planes need a non-zero normal");
  }
}

void SensorSpec::Validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(std::string("sensor.") + key + " must be positive");
  };
  auto non_negative = [](double v, const char* key) {
    if (!(v >= 0.0)) throw ConfigError(std::string("sensor.") + key + " must be non-negative");
  };
  positive(horizontal_fov_deg, "horizontal_fov_deg");
  positive(vertical_fov_deg, "vertical_fov_deg");
  positive(scan_rate_hz, "scan_rate_hz");
  positive(max_range, "max_range");
  positive(gyro_rate_hz, "gyro_rate_hz");
  non_negative(min_range, "min_range");
  non_negative(doppler_noise, "doppler_noise");
  non_negative(range_noise, "range_noise");
  non_negative(gyro_noise, "gyro_noise");
  if (rows < 1) throw ConfigError("sensor.rows must be >= 1");
  if (columns < 2) throw ConfigError("sensor.columns must be >= 2");
}

GroundTruth::GroundTruth(const Pose& start, std::vector<TwistSegment> segments)
    : segments_(std::move(segments)) {
  segment_start_poses_.reserve(segments_.size());
  Pose current = start;
  for (const auto& s : segments_) {
    segment_start_poses_.push_back(current);
    current = current * exp_map((s.t_end - s.t_begin) * s.twist);
  }
}

std::size_t GroundTruth::SegmentIndex(double t) const {
  if (t < t_begin() - kContiguityTolerance || t > t_end() + kContiguityTolerance) {
    std::ostringstream msg;
    msg << "ground truth queried at t=" << t << " outside [" << t_begin() << ", " << t_end()
        << "]";
    throw DomainError(msg.str());
  }
  const auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                   [](double v, const TwistSegment& s) { return v < s.t_begin; });
  const std::size_t idx = (it == segments_.begin()) ? 0 : static_cast<std::size_t>(it - segments_.begin()) - 1;
  return std::min(idx, segments_.size() - 1);
}

Pose GroundTruth::pose(double t) const {
  const std::size_t i = SegmentIndex(t);
  const TwistSegment& s = segments_[i];
  return segment_start_poses_[i] * exp_map((t - s.t_begin) * s.twist);
}

Twist GroundTruth::twist(double t) const { return segments_[SegmentIndex(t)].twist; }

std::vector<TwistSegment> segments_from_durations(
    const std::vector<std::pair<double, Twist>>& pieces) {
  std::vector<TwistSegment> out;
  double t = 0.0;
  for (const auto& [duration, twist] : pieces) {
    out.push_back({t, t + duration, twist});
    t += duration;
  }
  return out;
}

GroundTruth build_trajectory(const Pose& start, std::vector<TwistSegment> segments) {
  if (segments.empty()) throw ConfigError("route: at least one segment is required");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.t_end > s.t_begin)) {
      throw ConfigError("route.segments[" + std::to_string(i) + "]: t_end must exceed t_begin");
    }
    if (!s.twist.allFinite()) {
      throw ConfigError("route.segments[" + std::to_string(i) + "]: twist must be finite");
    }
    if (i == 0) continue;
    const double gap = s.t_begin - segments[i - 1].t_end;
    if (gap < -kContiguityTolerance) {
      throw ConfigError("route.segments[" + std::to_string(i) + "] overlaps the previous segment");
    }
    if (gap > kContiguityTolerance) {
      throw ConfigError("route.segments[" + std::to_string(i) +
                        "] leaves a gap after the previous segment");
    }
  }
  return GroundTruth(start, std::move(segments));
}

LidarFrame render_scan(const WorldSpec& world, const GroundTruth& gt, double t_start,
                       double t_end, const SensorSpec& sensor, std::uint64_t frame_seed) {
  if (std::abs((t_end - t_start) - sensor.frame_period()) > 1e-9) {
    throw InvalidArgumentError("render_scan: frame duration must equal 1 / scan rate");
  }
  std::mt19937_64 rng = MakeRng(world.seed, frame_seed, 0x5ca9);
  std::normal_distribution<double> unit_normal(0.0, 1.0);

  const Pose T_vs = sensor.T_vehicle_sensor;
  const Pose T_sv = T_vs.inverse();
  const AdjointMap Ad_sv = adjoint(T_sv);

  // Cull boxes that cannot be reached from anywhere along this frame's path.
  const Eigen::Vector3d p0 = (gt.pose(t_start) * T_vs).translation();
  const Eigen::Vector3d p1 = (gt.pose(t_end) * T_vs).translation();
  const Eigen::Vector3d mid = 0.5 * (p0 + p1);
  const double reach = sensor.max_range + 0.5 * (p1 - p0).norm();
  std::vector<const BoxPrimitive*> boxes;
  for (const auto& b : world.boxes) {
    if (DistanceToBox(mid, b) <= reach) boxes.push_back(&b);
  }

  LidarFrame frame;
  frame.t_start = t_start;
  frame.t_end = t_end;
  frame.points.reserve(static_cast<std::size_t>(sensor.rows) * sensor.columns);

  const double half_az = 0.5 * sensor.horizontal_fov_deg;
  const double half_el = 0.5 * sensor.vertical_fov_deg;
  for (int c = 0; c < sensor.columns; ++c) {
    const double alpha = static_cast<double>(c) / static_cast<double>(sensor.columns - 1);
    const double t = t_start + alpha * (t_end - t_start);
    // Sweep from left (+az) to right (-az).
    const double az =
        (half_az - sensor.horizontal_fov_deg * (c + 0.5) / sensor.columns) * kDegToRad;
    const Pose T_ws = gt.pose(t) * T_vs;
    const Eigen::Vector3d v_sensor = (Ad_sv * gt.twist(t)).head<3>();
    const Eigen::Vector3d& origin = T_ws.translation();
    const Eigen::Matrix3d& C_ws = T_ws.rotation();

    for (int r = 0; r < sensor.rows; ++r) {
      const double el =
          (-half_el + sensor.vertical_fov_deg * (r + 0.5) / sensor.rows) * kDegToRad;
      const Eigen::Vector3d dir_s(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                                  std::sin(el));
      const Eigen::Vector3d dir_w = C_ws * dir_s;

      Hit hit;
      for (const auto& plane : world.planes) {
        const double denom = plane.normal.dot(dir_w);
        if (std::abs(denom) < 1e-12) continue;
        const double d = (plane.offset - plane.normal.dot(origin)) / denom;
        if (d > 0.0 && d < hit.distance) hit = Hit{d, Eigen::Vector3d::Zero()};
      }
      for (const BoxPrimitive* b : boxes) {
        double d;
        if (IntersectBox(origin, dir_w, b->min_corner, b->max_corner, &d) && d < hit.distance) {
          hit = Hit{d, Eigen::Vector3d::Zero()};
        }
      }
      for (const auto& dyn : world.dynamic_boxes) {
        const Eigen::Vector3d shift = dyn.velocity * t;
        double d;
        if (IntersectBox(origin, dir_w, dyn.box.min_corner + shift, dyn.box.max_corner + shift,
                         &d) &&
            d < hit.distance) {
          hit = Hit{d, dyn.velocity};
        }
      }
      if (!(hit.distance <= sensor.max_range) || hit.distance < sensor.min_range) continue;

      const double range_noise = sensor.range_noise > 0.0 ? sensor.range_noise * unit_normal(rng) : 0.0;
      const double doppler_noise =
          sensor.doppler_noise > 0.0 ? sensor.doppler_noise * unit_normal(rng) : 0.0;
      const double measured_range = hit.distance + range_noise;

      const Eigen::Vector3d surface_velocity_s = C_ws.transpose() * hit.surface_velocity;
      LidarPoint p;
      p.position = measured_range * dir_s;
      p.timestamp = t;
      p.doppler = dir_s.dot(v_sensor - surface_velocity_s) + sensor.bias_slope * measured_range +
                  sensor.bias_intercept + doppler_noise;
      frame.points.push_back(p);
    }
  }
  return frame;
}

std::vector<GyroSample> simulate_gyro(const GroundTruth& gt, const SensorSpec& sensor,
                                      double t_start, double t_end, std::uint64_t frame_seed) {
  if (!(sensor.gyro_rate_hz > 0.0)) throw InvalidArgumentError("gyro rate must be positive");
  std::mt19937_64 rng = MakeRng(0, frame_seed, 0x6e70);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  const Eigen::Matrix3d C_sv = sensor.T_vehicle_sensor.rotation().transpose();
  std::vector<GyroSample> out;
  const auto first = static_cast<std::int64_t>(std::ceil(t_start * sensor.gyro_rate_hz - 1e-9));
  for (std::int64_t k = first;; ++k) {
    const double t = static_cast<double>(k) / sensor.gyro_rate_hz;
    if (t >= t_end - 1e-12) break;
    if (t < t_start) continue;
    GyroSample s;
    s.stamp = t;
    s.rate = C_sv * angular(gt.twist(t)) + sensor.gyro_bias;
    if (sensor.gyro_noise > 0.0) {
      s.rate += sensor.gyro_noise *
                Eigen::Vector3d(unit_normal(rng), unit_normal(rng), unit_normal(rng));
    }
    out.push_back(s);
  }
  return out;
}

WorldSpec generate_street_world(const GroundTruth& route, const StreetWorldOptions& options,
                                std::uint64_t seed) {
  WorldSpec world;
  world.seed = seed;
  world.planes.push_back(PlanePrimitive{Eigen::Vector3d::UnitZ(), 0.0});

  std::mt19937_64 rng = MakeRng(seed, 0, 0x57ee);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  // Dense samples of the driven path, used to keep buildings off the road.
  std::vector<Eigen::Vector3d> path;
  const double duration = route.t_end() - route.t_begin();
  const int samples = std::max(2, static_cast<int>(duration * 10.0));
  for (int i = 0; i <= samples; ++i) {
    path.push_back(route.pose(route.t_begin() + duration * i / samples).translation());
  }
  constexpr double kRoadClearance = 4.0;
  auto clear_of_road = [&](const BoxPrimitive& b) {
    for (const auto& p : path) {
      Eigen::Vector3d q = p;
      q.z() = 0.5 * (b.min_corner.z() + b.max_corner.z());
      if (DistanceToBox(q, b) < kRoadClearance) return false;
    }
    return true;
  };

  double travelled = 0.0;
  double next = 0.0;
  Eigen::Vector3d prev = path.front();
  for (int i = 0; i <= samples; ++i) {
    const double t = route.t_begin() + duration * i / samples;
    const Pose pose = route.pose(t);
    travelled += (pose.translation() - prev).norm();
    prev = pose.translation();
    if (travelled < next) continue;
    next = travelled + options.spacing;
    const Eigen::Vector3d forward = pose.rotation().col(0);
    const Eigen::Vector3d left = pose.rotation().col(1);
    for (double side : {1.0, -1.0}) {
      if (unit(rng) < options.gap_probability) continue;
      const double setback = uniform(options.setback_min, options.setback_max);
      const double length = uniform(options.building_length_min, options.building_length_max);
      const double depth = uniform(4.0, 10.0);
      const double height = uniform(options.building_height_min, options.building_height_max);
      const Eigen::Vector3d centre = pose.translation() + side * (setback + 0.5 * depth) * left +
                                     uniform(-2.0, 2.0) * forward;
      // Extents along the dominant world axes of the local street direction.
      const bool along_x = std::abs(forward.x()) >= std::abs(forward.y());
      const double ex = along_x ? length : depth;
      const double ey = along_x ? depth : length;
      BoxPrimitive b;
      b.min_corner = Eigen::Vector3d(centre.x() - 0.5 * ex, centre.y() - 0.5 * ey, 0.0);
      b.max_corner = Eigen::Vector3d(centre.x() + 0.5 * ex, centre.y() + 0.5 * ey, height);
      if (clear_of_road(b)) world.boxes.push_back(b);
    }
  }

  for (int k = 0; k < options.dynamic_objects; ++k) {
    const double t_meet = route.t_begin() + duration * (k + 0.5) / options.dynamic_objects;
    const Pose pose = route.pose(t_meet);
    const Eigen::Vector3d forward = pose.rotation().col(0);
    const Eigen::Vector3d left = pose.rotation().col(1);
    const double direction = (k % 2 == 0) ? -1.0 : 1.0;
    Eigen::Vector3d velocity = direction * options.dynamic_speed * forward;
    velocity.z() = 0.0;
    // Ahead of the vehicle in the adjacent lane when the vehicle reaches t_meet.
    const Eigen::Vector3d centre_at_meet = pose.translation() + 15.0 * forward + 3.5 * left;
    const Eigen::Vector3d centre0 = centre_at_meet - velocity * t_meet;
    DynamicBox d;
    d.box.min_corner = Eigen::Vector3d(centre0.x() - 1.5, centre0.y() - 1.5, 0.2);
    d.box.max_corner = Eigen::Vector3d(centre0.x() + 1.5, centre0.y() + 1.5, 1.8);
    d.velocity = velocity;
    world.dynamic_boxes.push_back(d);
  }
  return world;
}

}  // namespace lidarloc
