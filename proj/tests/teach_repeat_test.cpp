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

#include "lidarloc/teach_repeat.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "lidarloc/error.hpp"
#include "lidarloc/simulator.hpp"
#include "test_util.hpp"

namespace lidarloc {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Twist TwistOf(double vx, double vy, double vz, double wx, double wy, double wz) {
  Twist t;
  t << vx, vy, vz, wx, wy, wz;
  return t;
}

// 6x6 grid on the world plane z = height, expressed in the sensor frame of
// `T_world_sensor`.
LidarFrame GridCloud(const Pose& T_world_sensor, double height) {
  LidarFrame f;
  const Pose to_sensor = T_world_sensor.inverse();
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      LidarPoint p;
      p.position = to_sensor * Eigen::Vector3d(0.25 + i, 0.25 + j, height);
      f.points.push_back(p);
    }
  }
  return f;
}

TeachBuilder MakeBuilder(VertexThresholds thresholds = {}) {
  return TeachBuilder(thresholds, Pose::Identity(), 0.5, 20, 0.95);
}

// Teach vertices spaced `spacing` metres along x with small planar submaps.
PoseGraph ChainGraph(std::size_t count, double spacing) {
  PoseGraph g;
  for (std::size_t i = 0; i < count; ++i) {
    const Pose P = Pose::FromTranslation({spacing * static_cast<double>(i), 0, 0});
    g.AddTeachVertex(P, static_cast<double>(i), GridCloud(P, -1.0));
  }
  return g;
}

TEST(TeachBuilder, StationarySequenceCreatesOneVertex) {
  TeachBuilder b = MakeBuilder();
  const Pose P = Pose::FromTranslation({3, 4, 0});
  for (int i = 0; i < 20; ++i) b.Add(GridCloud(P, -1.0), P, 0.1 * i);
  EXPECT_EQ(b.graph().teach_ids().size(), 1u);
}

TEST(TeachBuilder, StraightHundredMetresAtTenMetreThreshold) {
  TeachBuilder b = MakeBuilder();
  for (int i = 0; i <= 100; ++i) {
    const Pose P = Pose::FromTranslation({static_cast<double>(i), 0, 0});
    b.Add(GridCloud(P, -1.0), P, 0.1 * i);
  }
  EXPECT_EQ(b.graph().teach_ids().size(), 11u);
}

TEST(TeachBuilder, LShapedRouteSpacingWithinThresholds) {
  const VertexThresholds th;
  TeachBuilder b = MakeBuilder(th);
  // 40 m straight, a 90 degree left turn over 15 m of arc, 40 m straight.
  const double step = 0.8;
  const double radius = 15.0 / (std::numbers::pi / 2);
  std::vector<Twist> steps;
  for (int i = 0; i < 50; ++i) steps.push_back(TwistOf(step, 0, 0, 0, 0, 0));
  const int turn_steps = static_cast<int>(std::round(15.0 / step));
  for (int i = 0; i < turn_steps; ++i) {
    steps.push_back(TwistOf(step, 0, 0, 0, 0, step / radius * (15.0 / (turn_steps * step))));
  }
  for (int i = 0; i < 50; ++i) steps.push_back(TwistOf(step, 0, 0, 0, 0, 0));
  Pose P;
  double max_rot_step = 0.0;
  b.Add(GridCloud(P, -1.0), P, 0.0);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    P = P * exp_map(steps[i]);
    max_rot_step = std::max(max_rot_step, steps[i].tail<3>().norm());
    b.Add(GridCloud(P, -1.0), P, 0.1 * static_cast<double>(i + 1));
  }
  const PoseGraph& g = b.graph();
  ASSERT_GE(g.teach_ids().size(), 9u);
  for (std::size_t k = 1; k < g.teach_ids().size(); ++k) {
    const Pose d = g.vertex(g.teach_ids()[k - 1]).pose.inverse() * g.vertex(g.teach_ids()[k]).pose;
    const double dist = d.translation().norm();
    const double angle = testing::RotationAngleDeg(d.rotation()) * kDeg;
    // Created once either threshold is reached, and at most one step later.
    EXPECT_TRUE(dist >= th.translation - 1e-9 || angle >= th.rotation - 1e-9) << k;
    EXPECT_LE(dist, th.translation + step + 1e-9) << k;
    EXPECT_LE(angle, th.rotation + max_rot_step + 1e-9) << k;
  }
}

TEST(TeachBuilder, SubmapIsUnionOfLastThreeFramesInVertexFrame) {
  TeachBuilder b = MakeBuilder(VertexThresholds{2.5, 1.0});
  std::vector<Pose> poses;
  std::vector<Eigen::Vector3d> world;
  for (int k = 0; k < 4; ++k) {
    const Pose P = exp_map(TwistOf(1.0 * k, 0.1 * k, 0, 0, 0, 0.05 * k));
    poses.push_back(P);
    const LidarFrame cloud = GridCloud(P, -50.0 * (k + 1));
    for (const auto& p : cloud.points) world.push_back(P * p.position);
    const auto id = b.Add(cloud, P, 0.1 * k);
    EXPECT_EQ(id.has_value(), k == 0 || k == 3) << k;
  }
  const GraphVertex& v = b.graph().vertex(b.graph().teach_ids().back());
  ASSERT_EQ(v.submap.size(), 3u * 36u);
  const Pose to_vertex = poses[3].inverse();
  for (const auto& p : v.submap.points) {
    double best = 1e9;
    for (std::size_t i = 36; i < world.size(); ++i) {
      best = std::min(best, (to_vertex * world[i] - p.position).norm());
    }
    EXPECT_LT(best, 1e-9);
    EXPECT_FALSE(p.normal.has_value());
  }
}

TEST(FindNearestVertex, ExactAndMidwayCases) {
  const PoseGraph g = ChainGraph(12, 10.0);
  EXPECT_EQ(find_nearest_vertex(g, g.vertex(5).pose, 5), 5u);
  EXPECT_EQ(find_nearest_vertex(g, Pose::FromTranslation({55.05, 0, 0}), 5), 6u);
  EXPECT_EQ(find_nearest_vertex(g, Pose::FromTranslation({54.95, 0, 0}), 6), 5u);
}

TEST(FindNearestVertex, MatchesExhaustiveSearchWithinHopRadius) {
  const PoseGraph g = ChainGraph(40, 10.0);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick(0, 39);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int q = 0; q < 100; ++q) {
    const VertexId start = static_cast<VertexId>(pick(rng));
    const Pose estimate =
        Pose::FromTranslation({10.0 * static_cast<double>(start) + u(rng), 0.1 * u(rng), 0.0});
    VertexId oracle = 0;
    double best = 1e18;
    for (VertexId v = 0; v < 40; ++v) {
      if (v + 5 < start || v > start + 5) continue;
      const double d = (g.vertex(v).pose.translation() - estimate.translation()).norm();
      if (d < best) {
        best = d;
        oracle = v;
      }
    }
    EXPECT_EQ(find_nearest_vertex(g, estimate, start, 5), oracle) << q;
  }
}

TEST(FindNearestVertex, SearchIsBoundedByHopRadius) {
  const PoseGraph g = ChainGraph(20, 10.0);
  EXPECT_EQ(find_nearest_vertex(g, g.vertex(15).pose, 2, 5), 7u);
}

struct PriorChain {
  PoseGraph graph;
  VertexId teach_prev = 0;
  VertexId teach_next = 0;
  std::vector<VertexId> repeat;
};

// Teach vertices a and b, repeat vertices r0..rn where r0 localizes to a
// with `T_r0_a` and odometry edges follow.
PriorChain BuildChain(const Pose& P_a, const Pose& P_b, const Pose& T_r0_a,
                      const std::vector<Pose>& odometry) {
  PriorChain c;
  c.teach_prev = c.graph.AddTeachVertex(P_a, 0.0, GridCloud(P_a, -1.0));
  c.teach_next = c.graph.AddTeachVertex(P_b, 1.0, GridCloud(P_b, -1.0));
  c.repeat.push_back(c.graph.AddRepeatVertex(0, 0.0, std::nullopt));
  c.graph.AddEdge({EdgeType::kLocalization, c.teach_prev, c.repeat[0], T_r0_a});
  for (std::size_t k = 0; k < odometry.size(); ++k) {
    c.repeat.push_back(
        c.graph.AddRepeatVertex(k + 1, 0.1 * (k + 1), std::make_pair(c.repeat.back(), odometry[k])));
  }
  return c;
}

TEST(CompoundPrior, IdentityEdgesGiveIdentity) {
  const PriorChain c = BuildChain(Pose(), Pose(), Pose(), {Pose(), Pose(), Pose()});
  EXPECT_LT(testing::PoseDistance(compound_prior(c.graph, c.repeat.back(), c.teach_next), Pose()),
            1e-15);
}

TEST(CompoundPrior, SingleStepEqualsThreeTermProduct) {
  std::mt19937_64 rng(3);
  const Pose P_a = testing::RandomPose(rng), P_b = testing::RandomPose(rng);
  const Pose T_prev = testing::RandomPose(rng), T_step = testing::RandomPose(rng);
  const PriorChain c = BuildChain(P_a, P_b, T_prev, {T_step});
  const Pose T_a_b = P_a.inverse() * P_b;
  const Pose expected = T_step * T_prev * T_a_b;
  EXPECT_LT(testing::PoseDistance(compound_prior(c.graph, c.repeat[1], c.teach_next), expected),
            1e-12);
}

TEST(CompoundPrior, FiveStepChainMatchesFoldOracle) {
  std::mt19937_64 rng(5);
  const Pose P_a = testing::RandomPose(rng), P_b = testing::RandomPose(rng);
  const Pose T_prev = testing::RandomPose(rng, 1.0, 0.3);
  std::vector<Pose> odo;
  for (int k = 0; k < 5; ++k) odo.push_back(testing::RandomPose(rng, 1.0, 0.3));
  const PriorChain c = BuildChain(P_a, P_b, T_prev, odo);
  // T_{r,r-1} ... T_{r-4,r-5}, then T_{r-5,a} and T_{a,b}.
  Eigen::Matrix4d fold = Eigen::Matrix4d::Identity();
  for (int k = 4; k >= 0; --k) fold = fold * odo[static_cast<std::size_t>(k)].matrix();
  fold = fold * T_prev.matrix() * P_a.matrix().inverse() * P_b.matrix();
  const Pose got = compound_prior(c.graph, c.repeat.back(), c.teach_next);
  EXPECT_LT((got.matrix() - fold).norm(), 1e-12);
}

TEST(CompoundPrior, MissingChainThrowsGraphIntegrity) {
  PoseGraph g = ChainGraph(2, 10.0);
  const VertexId r0 = g.AddRepeatVertex(0, 0.0, std::nullopt);
  const VertexId r1 = g.AddRepeatVertex(1, 0.1, std::make_pair(r0, Pose()));
  EXPECT_THROW(compound_prior(g, r1, 0), GraphIntegrityError);
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

// Teach vertex from three stationary room scans.
PoseGraph RoomVertex() {
  SensorSpec sensor;
  sensor.rows = 32;
  sensor.columns = 360;
  const auto gt = build_trajectory(Pose(), {{0, 1, Twist::Zero()}});
  TeachBuilder b(VertexThresholds{}, Pose(), 0.5, 20, 0.95);
  for (int k = 0; k < 3; ++k) {
    const LidarFrame scan = render_scan(RoomWorld(), gt, 0.1 * k, 0.1 * k + 0.1, sensor);
    b.Add(extract_planar_features(voxel_downsample(scan, 0.25), 20, 0.95), Pose(), 0.1 * k);
  }
  return b.Release();
}

// Every other indexed submap point, expressed in the live sensor frame.
LidarFrame SampledFrame(const GraphVertex& v, const Pose& T_r_m) {
  LidarFrame f;
  const auto& pts = v.index->points();
  for (std::size_t i = 0; i < pts.size(); i += 2) {
    LidarPoint p;
    p.position = T_r_m * pts[i];
    f.points.push_back(p);
  }
  return f;
}

TEST(Localize, PriorAtTruthConvergesInOneIteration) {
  const PoseGraph g = RoomVertex();
  const GraphVertex& v = g.vertex(0);
  const Pose truth = exp_map(TwistOf(-1.0, 0.5, 0.0, 0, 0, 0.1));
  const LocResult r = localize(SampledFrame(v, truth), v, truth, LocalizeConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LT(testing::PoseDistance(r.T_r_m, truth), 1e-9);
}

TEST(Localize, RecoversOffsetPrior) {
  const PoseGraph g = RoomVertex();
  const GraphVertex& v = g.vertex(0);
  const Pose truth = exp_map(TwistOf(-1.0, 0.5, 0.0, 0, 0, 0.1));
  const Pose prior = exp_map(TwistOf(0.3 / std::sqrt(2.0), 0.3 / std::sqrt(2.0), 0, 0, 0,
                                     1.0 * kDeg)) *
                     truth;
  const LocResult r = localize(SampledFrame(v, truth), v, prior, LocalizeConfig{});
  EXPECT_TRUE(r.converged);
  const Pose err = truth.inverse() * r.T_r_m;
  EXPECT_LT(err.translation().norm(), 1e-4);
  EXPECT_LT(testing::RotationAngleDeg(err.rotation()), 1e-3);
}

TEST(Localize, WithoutMeasurementsReturnsPrior) {
  const PoseGraph g = RoomVertex();
  const GraphVertex& v = g.vertex(0);
  LocalizeConfig config;
  config.icp.min_correspondences = 0;
  config.icp.max_correspondence_distance = 1e-9;
  std::mt19937_64 rng(2);
  const Pose prior = testing::RandomPose(rng, 3.0, 1.0);
  const LocResult r = localize(SampledFrame(v, prior * exp_map(TwistOf(0.5, 0, 0, 0, 0, 0))), v,
                               prior, config);
  EXPECT_EQ(r.correspondences, 0u);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(testing::PoseDistance(r.T_r_m, prior), 1e-12);
}

TEST(Localize, PriorRotationAtPiThrowsDomain) {
  const PoseGraph g = RoomVertex();
  const Pose prior(so3_exp(Eigen::Vector3d(0, 0, std::numbers::pi)), Eigen::Vector3d::Zero());
  EXPECT_THROW(localize(SampledFrame(g.vertex(0), Pose()), g.vertex(0), prior, LocalizeConfig{}),
               DomainError);
}

// Straight-then-turning street route: teach on one lane, repeat 0.3 m to
// the left of it.
struct StreetScenario {
  GroundTruth teach_gt;
  GroundTruth repeat_gt;
  WorldSpec world;
  SensorSpec sensor;
  IcpConfig icp;

  explicit StreetScenario(std::size_t frames) {
    const double T = 0.1 * static_cast<double>(frames) + 0.2;
    auto segs = segments_from_durations({{0.5 * T, TwistOf(8, 0, 0, 0, 0, 0)},
                                         {0.5 * T, TwistOf(8, 0, 0, 0, 0, 0.2)}});
    const Pose start = Pose::FromTranslation({0, 0, 1.0});
    teach_gt = build_trajectory(start, segs);
    repeat_gt = build_trajectory(Pose::FromTranslation({0, 0.3, 1.0}), segs);
    segs.back().t_end += 4.0;  // buildings beyond the end of the drive
    world = generate_street_world(build_trajectory(start, segs), StreetWorldOptions{}, 3);
    sensor.rows = 32;
    sensor.columns = 480;
    sensor.T_vehicle_sensor = Pose::FromTranslation({1.0, 0, 0.8});
    icp.T_vehicle_sensor = sensor.T_vehicle_sensor;
  }

  FrameSource Source(const GroundTruth& gt, std::uint64_t seed) const {
    return [this, &gt, seed](std::size_t i) {
      const double t0 = 0.1 * static_cast<double>(i);
      return FrameInput{render_scan(world, gt, t0, t0 + 0.1, sensor, seed + i),
                        simulate_gyro(gt, sensor, t0, t0 + 0.1, seed + i)};
    };
  }

  PoseGraph Teach(std::size_t frames) const {
    return teach(Source(teach_gt, 1000), frames, icp, VertexThresholds{}, teach_gt.pose(0.1));
  }

  RepeatConfig Config(Backend backend, std::size_t interval) const {
    RepeatConfig rc;
    rc.backend = backend;
    rc.interval = interval;
    rc.icp = icp;
    rc.doppler.T_vehicle_sensor = sensor.T_vehicle_sensor;
    rc.localize.icp = icp;
    rc.initial_pose = repeat_gt.pose(0.1);
    return rc;
  }

  // Translation error of each frame against the vertex-relative truth.
  std::vector<double> Errors(const RepeatResult& r) const {
    std::vector<double> e;
    for (const RepeatFrame& f : r.frames) {
      const Pose truth_vertex = teach_gt.pose(r.graph.vertex(f.vertex).stamp);
      const Pose estimate = truth_vertex * f.T_r_m.inverse();
      e.push_back((estimate.translation() - repeat_gt.pose(f.stamp).translation()).norm());
    }
    return e;
  }
};

double Rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

TEST(Teach, StreetRouteVerticesTrackGroundTruth) {
  const StreetScenario sc(30);
  const PoseGraph g = sc.Teach(30);
  ASSERT_GE(g.teach_ids().size(), 2u);
  for (VertexId id : g.teach_ids()) {
    const GraphVertex& v = g.vertex(id);
    EXPECT_FALSE(v.submap.empty());
    EXPECT_LT((v.pose.translation() - sc.teach_gt.pose(v.stamp).translation()).norm(), 0.05);
  }
}

TEST(Repeat, IntervalTenOverHundredFramesMakesTenAttempts) {
  const StreetScenario sc(100);
  const PoseGraph g = sc.Teach(100);
  RepeatConfig rc = sc.Config(Backend::kDoppler, 10);
  const RepeatResult r = repeat(sc.Source(sc.repeat_gt, 2000), 100, g, rc);
  EXPECT_EQ(r.counters.localization_attempts, 10u);
  EXPECT_EQ(r.localizations.size(), 10u);
  EXPECT_EQ(r.counters.stored_cloud_touches, 10u);
  for (const RepeatFrame& f : r.frames) EXPECT_EQ(f.attempted, f.index % 10 == 0);
}

TEST(Repeat, GraphIntegrityAndOdometryIndependentOfInterval) {
  const StreetScenario sc(20);
  const PoseGraph g = sc.Teach(20);
  for (Backend backend : {Backend::kDoppler, Backend::kIcp}) {
    const RepeatResult every = repeat(sc.Source(sc.repeat_gt, 2000), 20, g, sc.Config(backend, 1));
    const RepeatResult sparse = repeat(sc.Source(sc.repeat_gt, 2000), 20, g, sc.Config(backend, 4));
    EXPECT_EQ(every.counters.localization_attempts, 20u);
    EXPECT_EQ(sparse.counters.localization_attempts, 5u);
    ASSERT_EQ(every.frames.size(), sparse.frames.size());
    for (std::size_t i = 0; i < every.frames.size(); ++i) {
      EXPECT_EQ(every.frames[i].odometry.matrix(), sparse.frames[i].odometry.matrix()) << i;
    }
    for (const RepeatResult* r : {&every, &sparse}) {
      const PoseGraph& rg = r->graph;
      const std::size_t n = r == &every ? 1 : 4;
      for (VertexId id : rg.repeat_ids()) {
        std::size_t odo_in = 0, loc_in = 0;
        for (std::size_t e : rg.incident(id)) {
          const GraphEdge& edge = rg.edges()[e];
          if (edge.dst != id) continue;
          if (edge.type == EdgeType::kOdometry) {
            ++odo_in;
          } else {
            ++loc_in;
            EXPECT_EQ(rg.vertex(edge.src).role, VertexRole::kTeach);
          }
        }
        const std::size_t frame = rg.vertex(id).frame;
        EXPECT_EQ(odo_in, frame == 0 ? 0u : 1u);
        if (frame % n != 0) EXPECT_EQ(loc_in, 0u) << frame;
        if (frame == 0) EXPECT_EQ(loc_in, 1u);
      }
    }
  }
}

// Noiseless route. The per-frame bound is looser than a geometric oracle
// would allow: 0.5 m voxels and 20-neighbour normals leave a few millimetres
// of association bias even for ideal scans.
TEST(Repeat, NoiselessAccuracyAndDopplerDriftWithInterval) {
  const StreetScenario sc(40);
  const PoseGraph g = sc.Teach(40);
  for (Backend backend : {Backend::kDoppler, Backend::kIcp}) {
    const RepeatResult r = repeat(sc.Source(sc.repeat_gt, 2000), 40, g, sc.Config(backend, 1));
    const std::vector<double> e = sc.Errors(r);
    EXPECT_LT(Rms(e), 0.02) << backend_name(backend);
    for (std::size_t i = 0; i < e.size(); ++i) EXPECT_LT(e[i], 0.06) << i;
  }
  const RepeatResult one = repeat(sc.Source(sc.repeat_gt, 2000), 40, g, sc.Config(Backend::kDoppler, 1));
  const RepeatResult ten =
      repeat(sc.Source(sc.repeat_gt, 2000), 40, g, sc.Config(Backend::kDoppler, 10));
  EXPECT_GT(Rms(sc.Errors(ten)), Rms(sc.Errors(one)));
}

TEST(GraphIo, RoundTripIsExactAndDeterministic) {
  PoseGraph g = ChainGraph(3, 7.5);
  const VertexId r0 = g.AddRepeatVertex(0, 0.25, std::nullopt);
  std::mt19937_64 rng(9);
  g.AddEdge({EdgeType::kLocalization, 1, r0, testing::RandomPose(rng)});
  const auto dir = std::filesystem::temp_directory_path() / "lidarloc_graph_io";
  std::filesystem::remove_all(dir);
  write_graph(dir, g);
  const PoseGraph back = read_graph(dir);
  ASSERT_EQ(back.size(), g.size());
  ASSERT_EQ(back.edges().size(), g.edges().size());
  for (VertexId v = 0; v < g.size(); ++v) {
    EXPECT_EQ(back.vertex(v).role, g.vertex(v).role);
    EXPECT_EQ(back.vertex(v).pose.matrix(), g.vertex(v).pose.matrix());
    EXPECT_EQ(back.vertex(v).stamp, g.vertex(v).stamp);
    EXPECT_EQ(back.vertex(v).submap.size(), g.vertex(v).submap.size());
    if (g.vertex(v).role == VertexRole::kTeach) {
      EXPECT_EQ(back.vertex(v).index->normals(), g.vertex(v).index->normals());
    }
  }
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    EXPECT_EQ(back.edges()[e].type, g.edges()[e].type);
    EXPECT_EQ(back.edges()[e].transform.matrix(), g.edges()[e].transform.matrix());
  }
  const auto dir2 = dir / "again";
  write_graph(dir2, back);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  EXPECT_EQ(slurp(dir / kGraphFileName), slurp(dir2 / kGraphFileName));
  EXPECT_EQ(slurp(dir / "submap_0.dlp"), slurp(dir2 / "submap_0.dlp"));
  std::filesystem::remove_all(dir);
}

TEST(GraphIo, MalformedLineNamesLine) {
  const auto dir = std::filesystem::temp_directory_path() / "lidarloc_graph_bad";
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / kGraphFileName);
    os << "V 0 1 0 0 0 0 1 0 0 0 0 1 0\nV 1 1 0 0\n";
  }
  try {
    read_graph(dir);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace lidarloc
