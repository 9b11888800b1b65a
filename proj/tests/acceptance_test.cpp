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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned
// here. The long-route criteria read tools/configs/street_noisy.json.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lidarloc/bench.hpp"
#include "lidarloc/doppler.hpp"
#include "lidarloc/error.hpp"
#include "lidarloc/eval.hpp"
#include "lidarloc/geom.hpp"
#include "lidarloc/icp.hpp"
#include "lidarloc/simulator.hpp"
#include "test_util.hpp"

namespace lidarloc {
namespace {

namespace fs = std::filesystem;

constexpr double kDeg = std::numbers::pi / 180.0;

// Criterion 1
constexpr double kRoundTripTol = 1e-9;
constexpr double kAssociativityTol = 1e-12;
constexpr double kGeometryBudgetS = 1.0;
// Criterion 2
constexpr double kDopplerLinearTol = 1e-3;    // m/s
constexpr double kDopplerAngularTol = 1e-6;   // rad/s
constexpr double kIcpTranslationTol = 1e-4;   // m
constexpr double kIcpRotationTolDeg = 1e-3;   // deg
constexpr double kEstimatorBudgetS = 30.0;
// Criterion 3
constexpr double kJacobianRelTol = 1e-5;
constexpr int kJacobianStates = 100;
// Criterion 4
constexpr double kRansacVelocityTol = 1e-6;
constexpr double kGateThreshold = 3.0;  // m/s
// Criterion 5
constexpr std::size_t kMinRouteFrames = 2000;
constexpr double kRuntimeNoise = 0.05;
constexpr std::size_t kGrowthInterval = 50;
// Criterion 7
constexpr std::size_t kBookkeepingFrames = 95;
// Criterion 8
constexpr double kUndistortRmsTol = 1e-3;  // m
// Criterion 9
constexpr double kEfficiencyFactor = 3.0;
constexpr std::size_t kEfficiencyInterval = 10;
// Sweep example: Doppler drift at n=50 against n=1.
constexpr double kDriftFactor = 2.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, fmt, args...);
  return buffer;
}

Twist TwistOf(double vx, double vy, double vz, double wx, double wy, double wz) {
  Twist t;
  t << vx, vy, vz, wx, wy, wz;
  return t;
}

WorldSpec RoomWorld() {
  WorldSpec w;
  w.planes.push_back({Eigen::Vector3d::UnitZ(), -2.0});
  w.boxes.push_back({Eigen::Vector3d(30, -40, -5), Eigen::Vector3d(32, 40, 20)});
  w.boxes.push_back({Eigen::Vector3d(-20, 9, -5), Eigen::Vector3d(60, 11, 10)});
  w.boxes.push_back({Eigen::Vector3d(-20, -14, -5), Eigen::Vector3d(60, -12, 12)});
  w.boxes.push_back({Eigen::Vector3d(12, 3, -5), Eigen::Vector3d(16, 7, 3)});
  w.boxes.push_back({Eigen::Vector3d(18, -8, -5), Eigen::Vector3d(21, -5, 6)});
  return w;
}

SensorSpec Sensor(int rows, int columns) {
  SensorSpec s;
  s.rows = rows;
  s.columns = columns;
  return s;
}

// ------------------------------------------------------------ criterion 1

Outcome Geometry() {
  const auto begin = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  double round_trip = 0.0, adjoint_conj = 0.0, adjoint_hom = 0.0, assoc = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vector6d xi = testing::RandomTwist(rng, 10.0, std::numbers::pi - 0.1);
    round_trip = std::max(round_trip, (log_map(exp_map(xi)) - xi).norm());

    const Pose a = testing::RandomPose(rng), b = testing::RandomPose(rng),
               c = testing::RandomPose(rng);
    const Vector6d w = testing::RandomTwist(rng, 1.0, 1.0);
    const Eigen::Matrix4d lhs = hat(Vector6d(adjoint(a) * w));
    const Eigen::Matrix4d rhs = a.matrix() * hat(w) * a.inverse().matrix();
    adjoint_conj = std::max(adjoint_conj, (lhs - rhs).norm());
    adjoint_hom = std::max(adjoint_hom, (adjoint(a * b) - adjoint(a) * adjoint(b)).norm());
    assoc = std::max(assoc, testing::PoseDistance((a * b) * c, a * (b * c)));
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  const bool pass = round_trip < kRoundTripTol && adjoint_conj < kRoundTripTol &&
                    adjoint_hom < kRoundTripTol && assoc < kAssociativityTol &&
                    seconds < kGeometryBudgetS;
  return {pass, Format("exp/log %.1e, Ad conj %.1e, Ad hom %.1e (tol %.0e); assoc %.1e (tol "
                       "%.0e); %.3f s (budget %.0f s)",
                       round_trip, adjoint_conj, adjoint_hom, kRoundTripTol, assoc,
                       kAssociativityTol, seconds, kGeometryBudgetS)};
}

// ------------------------------------------------------------ criterion 2

Outcome EstimatorExactness() {
  const auto begin = std::chrono::steady_clock::now();
  const WorldSpec world = RoomWorld();

  // Doppler: one frame with a weak prior recovers the constant twist.
  const Twist w_dop = TwistOf(10, 0, 0, 0, 0, 0.1);
  const auto gt_dop = build_trajectory(Pose::Identity(), {{0, 1, w_dop}});
  const SensorSpec dop_sensor = Sensor(16, 120);
  DopplerConfig dcfg;
  dcfg.Qc *= 1e6;
  const VelocityState prior{Twist::Zero(), 0.0, Matrix6d::Identity() * 1e-6};
  const VelocityState s = solve_velocity(render_scan(world, gt_dop, 0.0, 0.1, dop_sensor),
                                         simulate_gyro(gt_dop, dop_sensor, 0.0, 0.1), prior,
                                         dcfg);
  const double lin_err = (linear(s.twist) - linear(w_dop)).norm();
  const double ang_err = (angular(s.twist) - angular(w_dop)).norm();

  // ICP: a moving constant-twist frame against a dense undistorted map.
  const Twist w_icp = TwistOf(10, 0, 0, 0, 0, 0.1);
  const auto gt = build_trajectory(Pose::Identity(), {{0, 1, w_icp}});
  const SensorSpec dense = Sensor(200, 1200);
  const LidarFrame map_scan = render_scan(world, gt, 0.0, 0.1, dense);
  const KnotPair map_knots{TrajectoryKnot{gt.pose(0.0), w_icp, 0.0},
                           TrajectoryKnot{gt.pose(0.1), w_icp, 0.1}};
  LocalMap map;
  map.Insert(extract_planar_features(undistort(map_scan, map_knots, Pose::Identity()), 20, 0.95),
             gt.pose(0.1), 1);

  IcpConfig icfg;
  icfg.outlier_gate_sigmas = 3.0;
  const SensorSpec sparse = Sensor(24, 180);
  const LidarFrame frame = preprocess_icp_frame(render_scan(world, gt, 0.2, 0.3, sparse), icfg);
  const auto gyro = simulate_gyro(gt, sparse, 0.2, 0.3);
  const Pose start = gt.pose(0.2) * exp_map(TwistOf(0.2, -0.1, 0, 0, 0, 1.0 * kDeg));
  const Twist w_guess = w_icp + TwistOf(0.5, 0, 0, 0, 0, 0.02);
  const KnotPair guess{TrajectoryKnot{start, w_guess, 0.2},
                       TrajectoryKnot{start * exp_map(0.1 * w_guess), w_guess, 0.3}};
  const IcpResult r =
      icp_odometry_step(frame, map, gyro, guess, Matrix12d::Identity() * 1e-8, icfg);
  const Pose err = (gt.pose(0.2).inverse() * gt.pose(0.3)).inverse() * r.delta;
  const double t_err = err.translation().norm();
  const double r_err = testing::RotationAngleDeg(err.rotation());

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  const bool pass = lin_err < kDopplerLinearTol && ang_err < kDopplerAngularTol &&
                    r.converged && t_err < kIcpTranslationTol && r_err < kIcpRotationTolDeg &&
                    seconds < kEstimatorBudgetS;
  return {pass, Format("doppler |dv| %.1e m/s (tol %.0e), |dw| %.1e rad/s (tol %.0e); icp %s, "
                       "relative pose %.1e m (tol %.0e), %.1e deg (tol %.0e); %.1f s (budget "
                       "%.0f s)",
                       lin_err, kDopplerLinearTol, ang_err, kDopplerAngularTol,
                       r.converged ? "converged" : "NOT converged", t_err, kIcpTranslationTol,
                       r_err, kIcpRotationTolDeg, seconds, kEstimatorBudgetS)};
}

// ------------------------------------------------------------ criterion 3

KnotPair RandomKnots(std::mt19937_64& rng) {
  const double T = 0.1;
  const Pose P1 = testing::RandomPose(rng, 10.0, 2.0);
  const Twist w1 = testing::RandomTwist(rng, 10.0, 0.8);
  const Twist w2 = w1 + testing::RandomTwist(rng, 1.0, 0.2);
  const Pose P2 = P1 * exp_map(T * 0.5 * (w1 + w2) + testing::RandomTwist(rng, 0.05, 0.02));
  return {TrajectoryKnot{P1, w1, 1.0}, TrajectoryKnot{P2, w2, 1.0 + T}};
}

// Largest ||fd - J|| / max(1, ||J||) over the columns of a central difference.
template <typename Analytic, typename Numeric>
double RelativeJacobianError(const Analytic& J, Numeric&& fd) {
  const auto N = fd();
  return (N - J).norm() / std::max(1.0, J.norm());
}

Outcome Jacobians() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  const double h = 1e-6;
  double point = 0.0, gyro = 0.0, dop_gyro = 0.0;
  IcpConfig icfg;
  icfg.T_vehicle_sensor = testing::RandomPose(rng, 2.0, 0.5);
  DopplerConfig dcfg;
  dcfg.T_vehicle_sensor = icfg.T_vehicle_sensor;

  auto numeric = [&](const KnotPair& k, auto&& f) {
    Eigen::Matrix<double, 3, 24> N;
    for (int c = 0; c < 24; ++c) {
      Vector24d d = Vector24d::Zero();
      d(c) = h;
      N.col(c) = (f(perturb_knots(k, d)) - f(perturb_knots(k, -d))) / (2 * h);
    }
    return N;
  };

  for (int trial = 0; trial < kJacobianStates; ++trial) {
    const KnotPair k = RandomKnots(rng);
    const double t = k[0].stamp + u(rng);
    const Eigen::Vector3d q = testing::RandomVector3(rng, 30.0);
    const Eigen::Vector3d p = testing::RandomVector3(rng, 30.0);
    point = std::max(point, RelativeJacobianError(icp_point_jacobian(k, t, q, icfg), [&] {
      return numeric(k, [&](const KnotPair& kk) { return icp_point_residual(kk, t, q, p, icfg); });
    }));

    const GyroSample s{k[0].stamp + u(rng), testing::RandomVector3(rng, 0.5)};
    gyro = std::max(gyro, RelativeJacobianError(icp_gyro_jacobian(k, s, icfg), [&] {
      return numeric(k, [&](const KnotPair& kk) { return icp_gyro_residual(kk, s, icfg); });
    }));

    const GyroSample ds{u(rng), testing::RandomVector3(rng, 0.5)};
    Eigen::Matrix<double, 12, 1> x;
    x << testing::RandomTwist(rng, 10, 0.5), testing::RandomTwist(rng, 10, 0.5);
    dop_gyro = std::max(dop_gyro, RelativeJacobianError(
                                      gyro_residual_jacobian(ds, 0.0, 0.1, dcfg), [&] {
                                        Eigen::Matrix<double, 3, 12> N;
                                        for (int c = 0; c < 12; ++c) {
                                          Eigen::Matrix<double, 12, 1> xp = x, xm = x;
                                          xp(c) += h;
                                          xm(c) -= h;
                                          N.col(c) = (gyro_residual(ds, xp.head<6>(),
                                                                    xp.tail<6>(), 0.0, 0.1,
                                                                    dcfg) -
                                                      gyro_residual(ds, xm.head<6>(),
                                                                    xm.tail<6>(), 0.0, 0.1,
                                                                    dcfg)) /
                                                     (2 * h);
                                        }
                                        return N;
                                      }));
  }
  const bool pass = point < kJacobianRelTol && gyro < kJacobianRelTol && dop_gyro < kJacobianRelTol;
  return {pass, Format("%d states: icp point %.1e, icp gyro %.1e, doppler gyro %.1e (tol %.0e)",
                       kJacobianStates, point, gyro, dop_gyro, kJacobianRelTol)};
}

// ------------------------------------------------------------ criterion 4

Outcome RansacAndGate() {
  std::mt19937_64 rng(4);
  const Eigen::Vector3d v(8, 0.5, -0.2);
  LidarFrame frame;
  frame.t_start = 0.0;
  frame.t_end = 0.1;
  std::vector<std::size_t> planted;
  std::uniform_real_distribution<double> jump(2.0, 6.0);
  for (std::size_t i = 0; i < 300; ++i) {
    LidarPoint p;
    p.position = testing::RandomVector3(rng, 30.0);
    p.timestamp = 0.1 * static_cast<double>(i) / 300.0;
    p.doppler = p.position.normalized().dot(v);
    if (i % 10 < 3) {
      p.doppler += jump(rng);  // dynamic object
    } else {
      planted.push_back(i);
    }
    frame.points.push_back(p);
  }
  const RansacResult r = ransac_doppler_inliers(frame, DopplerConfig{}, 17);
  const bool exact = r.inliers == planted;
  const double v_err = (r.velocity - v).norm();
  const bool rejects = !forward_velocity_gate(TwistOf(12, 0, 0, 0, 0, 0),
                                              TwistOf(8, 0, 0, 0, 0, 0), kGateThreshold);
  const bool keeps = forward_velocity_gate(TwistOf(10.9, 0, 0, 0, 0, 0),
                                           TwistOf(8, 0, 0, 0, 0, 0), kGateThreshold);
  return {exact && v_err < kRansacVelocityTol && rejects && keeps,
          Format("30%% outliers: inliers %s (%zu/%zu), |dv| %.1e m/s (tol %.0e); 4 m/s jump %s, "
                 "2.9 m/s step %s at %.0f m/s",
                 exact ? "exact" : "MISMATCH", r.inliers.size(), planted.size(), v_err,
                 kRansacVelocityTol, rejects ? "rejected" : "ACCEPTED",
                 keeps ? "kept" : "REJECTED", kGateThreshold)};
}

// ------------------------------------------------------------ criterion 6

double BruteForceKnee(const std::vector<CurvePoint>& pts) {
  double max_rt = 0.0, max_err = 0.0;
  for (const auto& p : pts) {
    max_rt = std::max(max_rt, p.runtime_ms);
    max_err = std::max(max_err, p.error);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double a = pts[i].runtime_ms / max_rt * pts[i].error / max_err;
    const double b = pts[best].runtime_ms / max_rt * pts[best].error / max_err;
    if (a < b || (a == b && pts[i].runtime_ms < pts[best].runtime_ms)) best = i;
  }
  return static_cast<double>(best);
}

Outcome KneeDetection() {
  const std::vector<CurvePoint> three = {{1.0, 1.0}, {2.0, 0.4}, {4.0, 0.35}};
  const std::vector<CurvePoint> five = {
      {125, 0.10}, {100, 0.12}, {86, 0.15}, {75, 0.20}, {70, 0.30}};
  bool pass = true;
  std::string detail;
  for (const auto* curve : {&three, &five}) {
    const std::size_t knee = knee_point(*curve);
    const auto oracle = static_cast<std::size_t>(BruteForceKnee(*curve));
    pass = pass && knee == oracle;
    detail += Format("%zu-point knee %zu (oracle %zu); ", curve->size(), knee, oracle);
  }
  // Positive per-axis rescaling, including unit changes.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> scale(-3.0, 3.0);
  int stable = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const auto& base = t % 2 ? five : three;
    const double sx = std::pow(10.0, scale(rng)), sy = std::pow(10.0, scale(rng));
    std::vector<CurvePoint> scaled = base;
    for (auto& p : scaled) {
      p.runtime_ms *= sx;
      p.error *= sy;
    }
    stable += knee_point(scaled) == knee_point(base);
  }
  pass = pass && stable == trials;
  detail += Format("index unchanged under %d/%d positive axis rescalings", stable, trials);
  return {pass, detail};
}

// ------------------------------------------------------------ criterion 8

Outcome Undistortion() {
  const Twist w = TwistOf(10, 0.2, 0, 0.01, 0.02, 0.3);
  const auto gt = build_trajectory(Pose::Identity(), {{0, 1, w}});
  SensorSpec sensor = Sensor(48, 400);
  sensor.T_vehicle_sensor = exp_map(TwistOf(1.0, 0, 1.5, 0, 0.05, 0));
  const LidarFrame scan = render_scan(RoomWorld(), gt, 0.3, 0.4, sensor);
  const KnotPair k{TrajectoryKnot{gt.pose(0.3), w, 0.3}, TrajectoryKnot{gt.pose(0.4), w, 0.4}};
  const LidarFrame u = undistort(scan, k, sensor.T_vehicle_sensor);
  // Ideal instantaneous scan: every surface point seen from the end-of-scan pose.
  const Pose T_end_inv = (gt.pose(0.4) * sensor.T_vehicle_sensor).inverse();
  double sq = 0.0, raw = 0.0;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const Eigen::Vector3d ideal = T_end_inv * (gt.pose(scan.points[i].timestamp) *
                                               (sensor.T_vehicle_sensor * scan.points[i].position));
    sq += (u.points[i].position - ideal).squaredNorm();
    raw += (scan.points[i].position - ideal).squaredNorm();
  }
  const double rms = std::sqrt(sq / static_cast<double>(scan.size()));
  const double raw_rms = std::sqrt(raw / static_cast<double>(scan.size()));
  return {rms < kUndistortRmsTol && scan.size() > 1000,
          Format("%zu points: RMS %.1e m after, %.2f m before (tol %.0e)", scan.size(), rms,
                 raw_rms, kUndistortRmsTol)};
}

// ------------------------------------------------- long-route criteria (5, 7, 9)

fs::path OutputRoot() { return fs::path(LIDARLOC_ACCEPTANCE_OUT); }

RunConfig RouteConfig() {
  RunConfig c = load_run_config(fs::path(LIDARLOC_SOURCE_DIR) / "tools/configs/street_noisy.json");
  c.serial_timing = true;
  c.threads = 0;
  return c;
}

struct LongRoute {
  std::size_t frames = 0;
  double teach_s = 0.0;
  std::vector<SweepCell> cells;
};

const LongRoute& LongRun() {
  static const LongRoute run = [] {
    LongRoute out;
    const RunConfig c = RouteConfig();
    const Scenario scenario(c.route, c.seed);
    out.frames = scenario.frame_count();
    const auto t0 = std::chrono::steady_clock::now();
    const PoseGraph graph = run_teach(c, scenario);
    out.teach_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.cells = run_sweep(c, scenario, graph);
    std::vector<SweepResult> rows;
    for (const SweepCell& cell : out.cells) rows.push_back(cell.result);
    const fs::path dir = OutputRoot() / "street_noisy";
    fs::create_directories(dir);
    write_results_csv(dir / kResultsFileName, rows);
    write_report(dir, rows);
    return out;
  }();
  return run;
}

std::vector<const SweepCell*> CellsOf(const LongRoute& run, Backend backend) {
  std::vector<const SweepCell*> out;
  for (const SweepCell& c : run.cells) {
    if (c.backend == backend) out.push_back(&c);
  }
  std::sort(out.begin(), out.end(),
            [](const SweepCell* a, const SweepCell* b) { return a->interval < b->interval; });
  return out;
}

const SweepCell* CellAt(const LongRoute& run, Backend backend, std::size_t n) {
  for (const SweepCell* c : CellsOf(run, backend)) {
    if (c->interval == n) return c;
  }
  throw InvalidArgumentError("sweep has no cell for interval " + std::to_string(n));
}

// Mean of each value with its neighbours in interval order.
std::vector<double> Smooth3(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(v.size() - 1, i + 1);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += v[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

Outcome ParetoShape() {
  const LongRoute& run = LongRun();
  bool pass = run.frames >= kMinRouteFrames;
  std::string detail = Format("%zu frames; ", run.frames);
  double growth[2] = {0.0, 0.0};
  for (Backend b : {Backend::kDoppler, Backend::kIcp}) {
    const auto cells = CellsOf(run, b);
    std::vector<double> rmse;
    bool runtime_ok = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      rmse.push_back(cells[i]->result.rmse.translation_norm());
      if (i > 0 && cells[i]->result.runtime_ms >
                       (1.0 + kRuntimeNoise) * cells[i - 1]->result.runtime_ms) {
        runtime_ok = false;
      }
    }
    const auto smooth = Smooth3(rmse);
    const bool rmse_ok = std::is_sorted(smooth.begin(), smooth.end()) &&
                         rmse.back() >= rmse.front();
    const double g = CellAt(run, b, kGrowthInterval)->result.rmse.translation_norm() /
                     CellAt(run, b, 1)->result.rmse.translation_norm();
    growth[b == Backend::kIcp] = g;
    pass = pass && runtime_ok && rmse_ok;
    detail += Format("%s runtime %.2f->%.2f ms %s, RMSE %.3f->%.3f m %s; ",
                     b == Backend::kDoppler ? "doppler" : "icp", cells.front()->result.runtime_ms,
                     cells.back()->result.runtime_ms, runtime_ok ? "non-increasing" : "RISES",
                     rmse.front(), rmse.back(), rmse_ok ? "non-decreasing" : "NOT MONOTONE");
  }
  const double ratio = growth[0] / growth[1];
  pass = pass && ratio > 1.0;
  detail += Format("growth at n=%zu doppler %.2fx / icp %.2fx = %.2f (need > 1)", kGrowthInterval,
                   growth[0], growth[1], ratio);
  return {pass, detail};
}

Outcome Efficiency() {
  const LongRoute& run = LongRun();
  const double d = CellAt(run, Backend::kDoppler, kEfficiencyInterval)->result.runtime_ms;
  const double i = CellAt(run, Backend::kIcp, kEfficiencyInterval)->result.runtime_ms;
  RunConfig c = RouteConfig();
  return {i >= kEfficiencyFactor * d,
          Format("n=%zu: doppler %.2f ms (1 worker), icp %.2f ms (%d workers), ratio %.2f (need "
                 ">= %.0f)",
                 kEfficiencyInterval, d, i, effective_threads(c, Backend::kIcp), i / d,
                 kEfficiencyFactor)};
}

Outcome DopplerDrift() {
  const LongRoute& run = LongRun();
  const double r1 = CellAt(run, Backend::kDoppler, 1)->result.rmse.translation_norm();
  const double r50 = CellAt(run, Backend::kDoppler, 50)->result.rmse.translation_norm();
  return {r50 > kDriftFactor * r1,
          Format("doppler RMSE n=50 %.3f m vs n=1 %.3f m, factor %.2f (need > %.0f)", r50, r1,
                 r50 / r1, kDriftFactor)};
}

Outcome Bookkeeping() {
  RunConfig c = RouteConfig();
  c.route.frames = kBookkeepingFrames;
  c.intervals = {1, 10};
  const Scenario scenario(c.route, c.seed);
  const PoseGraph graph = run_teach(c, scenario);
  const auto cells = run_sweep(c, scenario, graph);
  bool pass = cells.size() == 4;
  std::string detail = Format("%zu frames: ", kBookkeepingFrames);
  for (const SweepCell& cell : cells) {
    const std::size_t n = cell.interval;
    const std::size_t expected = (kBookkeepingFrames + n - 1) / n;
    const auto& k = cell.run.counters;
    std::size_t flagged = 0;
    bool on_schedule = true;
    for (const RepeatFrame& f : cell.run.frames) {
      flagged += f.attempted;
      on_schedule = on_schedule && f.attempted == (f.index % n == 0);
    }
    pass = pass && k.localization_attempts == expected && flagged == expected && on_schedule;
    detail += Format("%s n=%zu attempts %zu (expect %zu)", cell.result.backend.c_str(), n,
                     k.localization_attempts, expected);
    if (cell.backend == Backend::kDoppler) {
      const bool touches_ok = k.stored_cloud_touches == expected;
      pass = pass && touches_ok;
      detail += Format(", stored-cloud touches %zu%s", k.stored_cloud_touches,
                       touches_ok ? "" : " (EXPECTED ONE PER ATTEMPT)");
    }
    detail += "; ";
  }
  return {pass, detail};
}

}  // namespace
}  // namespace lidarloc

int main() {
  using namespace lidarloc;
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"1", "geometry suite", Geometry},
      {"2", "estimator exactness", EstimatorExactness},
      {"3", "jacobian correctness", Jacobians},
      {"4", "ransac and gate", RansacAndGate},
      {"5", "qualitative pareto shape", ParetoShape},
      {"6", "knee detection", KneeDetection},
      {"7", "interval bookkeeping", Bookkeeping},
      {"8", "undistortion", Undistortion},
      {"9", "relative efficiency", Efficiency},
      {"sweep", "doppler drift example", DopplerDrift},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto begin = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    std::printf("[%s] criterion %s %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, s,
                o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu checks failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
