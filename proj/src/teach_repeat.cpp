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

#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "lidarloc/error.hpp"
#include "reduce.hpp"
#include "robust_gate.hpp"

namespace lidarloc {

namespace {

constexpr double kThresholdSlack = 1e-9;

double RotationAngle(const Eigen::Matrix3d& C) {
  return std::acos(std::clamp(0.5 * (C.trace() - 1.0), -1.0, 1.0));
}

class ThreadScope {
 public:
  explicit ThreadScope(int threads) : previous_(omp_get_max_threads()), active_(threads > 0) {
    if (active_) omp_set_num_threads(threads);
  }
  ~ThreadScope() {
    if (active_) omp_set_num_threads(previous_);
  }
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int previous_;
  bool active_;
};

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

const char* EdgeTypeName(EdgeType type) {
  return type == EdgeType::kOdometry ? "odometry" : "localization";
}

void RequireSpd6(const Matrix6d& m, const char* key) {
  if (!m.allFinite() || (m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm()) ||
      Eigen::LLT<Matrix6d>(m).info() != Eigen::Success) {
    throw ConfigError(std::string(key) + " must be symmetric positive definite");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// PoseGraph

VertexId PoseGraph::AddVertex(GraphVertex vertex) {
  if (vertex.id != vertices_.size()) {
    throw GraphIntegrityError("vertex ids must be contiguous; expected " +
                              std::to_string(vertices_.size()) + ", got " +
                              std::to_string(vertex.id));
  }
  (vertex.role == VertexRole::kTeach ? teach_ids_ : repeat_ids_).push_back(vertex.id);
  vertices_.push_back(std::move(vertex));
  incident_.emplace_back();
  return vertices_.back().id;
}

VertexId PoseGraph::AddTeachVertex(const Pose& pose, double stamp, LidarFrame submap,
                                   std::size_t k_neighbors) {
  if (submap.empty()) throw InvalidArgumentError("teach vertex submap is empty");
  GraphVertex v;
  v.id = vertices_.size();
  v.role = VertexRole::kTeach;
  v.pose = pose;
  v.stamp = stamp;
  v.index = build_submap_index(submap, k_neighbors);
  v.submap = std::move(submap);
  const bool linked = !teach_ids_.empty();
  const VertexId previous = linked ? teach_ids_.back() : 0;
  const VertexId id = AddVertex(std::move(v));
  if (linked) {
    AddEdge({EdgeType::kOdometry, previous, id, pose.inverse() * vertices_[previous].pose});
  }
  return id;
}

VertexId PoseGraph::AddRepeatVertex(std::size_t frame, double stamp,
                                    std::optional<std::pair<VertexId, Pose>> previous) {
  GraphVertex v;
  v.id = vertices_.size();
  v.role = VertexRole::kRepeat;
  v.stamp = stamp;
  v.frame = frame;
  const VertexId id = AddVertex(std::move(v));
  if (previous) AddEdge({EdgeType::kOdometry, previous->first, id, previous->second});
  return id;
}

void PoseGraph::AddEdge(const GraphEdge& edge) {
  if (edge.src >= vertices_.size() || edge.dst >= vertices_.size()) {
    throw GraphIntegrityError("edge " + std::to_string(edge.src) + " -> " +
                              std::to_string(edge.dst) + " references an unknown vertex");
  }
  if (edge.type == EdgeType::kLocalization &&
      (vertices_[edge.src].role != VertexRole::kTeach ||
       vertices_[edge.dst].role != VertexRole::kRepeat)) {
    throw GraphIntegrityError("localization edges run from a teach vertex to a repeat vertex");
  }
  incident_[edge.src].push_back(edges_.size());
  if (edge.dst != edge.src) incident_[edge.dst].push_back(edges_.size());
  edges_.push_back(edge);
}

const GraphVertex& PoseGraph::vertex(VertexId id) const {
  if (id >= vertices_.size()) {
    throw GraphIntegrityError("unknown vertex " + std::to_string(id));
  }
  return vertices_[id];
}

const std::vector<std::size_t>& PoseGraph::incident(VertexId id) const {
  if (id >= incident_.size()) throw GraphIntegrityError("unknown vertex " + std::to_string(id));
  return incident_[id];
}

std::optional<Pose> PoseGraph::Transform(VertexId a, VertexId b, EdgeType type) const {
  for (std::size_t e : incident(a)) {
    const GraphEdge& edge = edges_[e];
    if (edge.type != type) continue;
    if (edge.dst == a && edge.src == b) return edge.transform;
    if (edge.src == a && edge.dst == b) return edge.transform.inverse();
  }
  return std::nullopt;
}

std::shared_ptr<const LocalMap> build_submap_index(const LidarFrame& submap,
                                                   std::size_t k_neighbors) {
  if (submap.size() < k_neighbors) return std::make_shared<const LocalMap>();
  const LidarFrame annotated = extract_planar_features(submap, k_neighbors, 0.0);
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;
  points.reserve(annotated.size());
  normals.reserve(annotated.size());
  for (const LidarPoint& p : annotated.points) {
    points.push_back(p.position);
    normals.push_back(*p.normal);
  }
  return std::make_shared<const LocalMap>(std::move(points), std::move(normals));
}

// ---------------------------------------------------------------------------
// Teach

void VertexThresholds::Validate() const {
  if (!(translation > 0.0)) throw ConfigError("thresholds.translation must be positive");
  if (!(rotation > 0.0)) throw ConfigError("thresholds.rotation must be positive");
}

TeachBuilder::TeachBuilder(VertexThresholds thresholds, Pose T_vehicle_sensor, double voxel_size,
                           std::size_t k_neighbors, double planarity_threshold)
    : thresholds_(thresholds),
      T_vehicle_sensor_(T_vehicle_sensor),
      voxel_size_(voxel_size),
      k_neighbors_(k_neighbors),
      planarity_threshold_(planarity_threshold) {
  thresholds_.Validate();
  if (!(voxel_size_ > 0.0)) throw ConfigError("voxel_size must be positive");
  if (k_neighbors_ < 3) throw ConfigError("k_neighbors must be >= 3");
}

std::optional<VertexId> TeachBuilder::Add(const LidarFrame& undistorted, const Pose& pose,
                                          double stamp) {
  recent_.push_back({undistorted, pose});
  while (recent_.size() > 3) recent_.pop_front();

  if (last_vertex_pose_) {
    const Pose motion = last_vertex_pose_->inverse() * pose;
    const bool moved = motion.translation().norm() >= thresholds_.translation - kThresholdSlack;
    const bool turned = RotationAngle(motion.rotation()) >= thresholds_.rotation - kThresholdSlack;
    if (!moved && !turned) return std::nullopt;
  }
  LidarFrame submap = BuildSubmap(pose);
  if (submap.empty()) return std::nullopt;
  last_vertex_pose_ = pose;
  return graph_.AddTeachVertex(pose, stamp, std::move(submap), k_neighbors_);
}

LidarFrame TeachBuilder::BuildSubmap(const Pose& vertex_pose) const {
  LidarFrame merged;
  merged.t_start = std::numeric_limits<double>::infinity();
  merged.t_end = -std::numeric_limits<double>::infinity();
  const Pose T_vertex_map = vertex_pose.inverse();
  for (const Recent& r : recent_) {
    const Pose T = T_vertex_map * r.pose * T_vehicle_sensor_;
    merged.t_start = std::min(merged.t_start, r.cloud.t_start);
    merged.t_end = std::max(merged.t_end, r.cloud.t_end);
    for (const LidarPoint& p : r.cloud.points) {
      LidarPoint q;
      q.position = T * p.position;
      q.timestamp = p.timestamp;
      q.doppler = p.doppler;
      merged.points.push_back(q);
    }
  }
  LidarFrame sampled = voxel_downsample(merged, voxel_size_);
  if (sampled.size() < k_neighbors_) return sampled;
  LidarFrame planar = extract_planar_features(sampled, k_neighbors_, planarity_threshold_);
  for (LidarPoint& p : planar.points) {
    p.normal.reset();
    p.planarity.reset();
  }
  return planar;
}

PoseGraph teach(const FrameSource& source, std::size_t frame_count, const IcpConfig& config,
                const VertexThresholds& thresholds, const Pose& start_pose) {
  IcpOdometry odometry(config);
  TeachBuilder builder(thresholds, config.T_vehicle_sensor, config.voxel_size,
                       config.k_neighbors, config.planarity_threshold);
  std::optional<IcpStep> first;
  double first_stamp = 0.0;
  for (std::size_t i = 0; i < frame_count; ++i) {
    const FrameInput input = source(i);
    IcpStep step;
    try {
      step = odometry.Process(input.frame, input.gyro);
    } catch (const Error& e) {
      throw EstimationError("teach odometry failed at frame " + std::to_string(i) + ": " +
                            e.what());
    }
    if (step.result.diverged) {
      throw EstimationError("teach odometry diverged at frame " + std::to_string(i));
    }
    // The first frame is held back until the second one refines its motion.
    if (i == 0) {
      first = std::move(step);
      first_stamp = input.frame.t_end;
      continue;
    }
    if (first) {
      builder.Add(step.refined_first ? *step.refined_first : first->undistorted,
                  start_pose * first->knot.pose, first_stamp);
      first.reset();
    }
    builder.Add(step.undistorted, start_pose * step.knot.pose, input.frame.t_end);
  }
  if (first) builder.Add(first->undistorted, start_pose * first->knot.pose, first_stamp);
  if (builder.graph().teach_ids().empty()) {
    throw EstimationError("teach produced no vertices");
  }
  return builder.Release();
}

// ---------------------------------------------------------------------------
// Localization

VertexId find_nearest_vertex(const PoseGraph& graph, const Pose& estimate, VertexId start,
                             std::size_t hop_radius) {
  if (graph.teach_ids().empty()) throw InvalidArgumentError("graph has no teach vertices");
  if (graph.vertex(start).role != VertexRole::kTeach) {
    throw InvalidArgumentError("nearest-vertex search must start at a teach vertex");
  }
  std::vector<std::size_t> depth(graph.size(), std::numeric_limits<std::size_t>::max());
  std::vector<VertexId> frontier{start};
  depth[start] = 0;
  VertexId best = start;
  double best_distance = (graph.vertex(start).pose.translation() - estimate.translation()).norm();
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const VertexId v = frontier[head];
    const double d = (graph.vertex(v).pose.translation() - estimate.translation()).norm();
    if (d < best_distance || (d == best_distance && v < best)) {
      best = v;
      best_distance = d;
    }
    if (depth[v] == hop_radius) continue;
    for (std::size_t e : graph.incident(v)) {
      const GraphEdge& edge = graph.edges()[e];
      if (edge.type != EdgeType::kOdometry) continue;
      const VertexId other = edge.src == v ? edge.dst : edge.src;
      if (graph.vertex(other).role != VertexRole::kTeach ||
          depth[other] != std::numeric_limits<std::size_t>::max()) {
        continue;
      }
      depth[other] = depth[v] + 1;
      frontier.push_back(other);
    }
  }
  return best;
}

namespace {

// T_{a,b} between two teach vertices along the teach odometry chain.
Pose TeachChain(const PoseGraph& graph, VertexId a, VertexId b) {
  const auto& ids = graph.teach_ids();
  const auto ia = std::find(ids.begin(), ids.end(), a);
  const auto ib = std::find(ids.begin(), ids.end(), b);
  if (ia == ids.end() || ib == ids.end()) {
    throw GraphIntegrityError("teach chain endpoints must be teach vertices");
  }
  Pose T;
  const int step = ib >= ia ? 1 : -1;
  for (auto it = ia; it != ib; it += step) {
    const auto link = graph.Transform(*it, *(it + step), EdgeType::kOdometry);
    if (!link) {
      throw GraphIntegrityError("missing teach edge between " + std::to_string(*it) + " and " +
                                std::to_string(*(it + step)));
    }
    T = T * *link;
  }
  return T;
}

std::optional<std::pair<VertexId, Pose>> IncomingLocalization(const PoseGraph& graph,
                                                              VertexId v) {
  std::optional<std::pair<VertexId, Pose>> found;
  for (std::size_t e : graph.incident(v)) {
    const GraphEdge& edge = graph.edges()[e];
    if (edge.type == EdgeType::kLocalization && edge.dst == v) found = {edge.src, edge.transform};
  }
  return found;
}

std::optional<std::pair<VertexId, Pose>> IncomingOdometry(const PoseGraph& graph, VertexId v) {
  for (std::size_t e : graph.incident(v)) {
    const GraphEdge& edge = graph.edges()[e];
    if (edge.type == EdgeType::kOdometry && edge.dst == v &&
        graph.vertex(edge.src).role == VertexRole::kRepeat) {
      return std::make_pair(edge.src, edge.transform);
    }
  }
  return std::nullopt;
}

}  // namespace

Pose compound_prior(const PoseGraph& graph, VertexId r, VertexId m) {
  if (graph.vertex(r).role != VertexRole::kRepeat) {
    throw InvalidArgumentError("compound_prior needs a repeat vertex");
  }
  if (graph.vertex(m).role != VertexRole::kTeach) {
    throw InvalidArgumentError("compound_prior target must be a teach vertex");
  }
  Pose T_r_cur;  // T_{r,cur}
  VertexId cur = r;
  for (;;) {
    if (const auto loc = IncomingLocalization(graph, cur)) {
      return T_r_cur * loc->second * TeachChain(graph, loc->first, m);
    }
    const auto odo = IncomingOdometry(graph, cur);
    if (!odo) {
      throw GraphIntegrityError("no localization edge reachable from repeat vertex " +
                                std::to_string(r) + "; chain breaks at " + std::to_string(cur));
    }
    T_r_cur = T_r_cur * odo->second;
    cur = odo->first;
  }
}

void LocalizeConfig::Validate() const {
  icp.Validate();
  RequireSpd6(Q_prior, "localize.Q_prior");
}

namespace {

struct LocAccumulator {
  Matrix6d A = Matrix6d::Zero();
  Vector6d b = Vector6d::Zero();
  double cost = 0.0;
  std::size_t matches = 0;

  LocAccumulator& operator+=(const LocAccumulator& o) {
    A += o.A;
    b += o.b;
    cost += o.cost;
    matches += o.matches;
    return *this;
  }
};

}  // namespace

LocResult localize(const LidarFrame& frame, const GraphVertex& vertex, const Pose& prior,
                   const LocalizeConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  if (vertex.role != VertexRole::kTeach) {
    throw InvalidArgumentError("localization target must be a teach vertex");
  }
  if (RotationAngle(prior.rotation()) >= std::numbers::pi - 1e-6) {
    throw DomainError("localization prior rotation is at pi; re-initialization required");
  }
  const IcpConfig& icp = config.icp;
  std::shared_ptr<const LocalMap> index = vertex.index;
  if (!index) index = build_submap_index(vertex.submap, icp.k_neighbors);

  std::vector<Eigen::Vector3d> query;
  query.reserve(frame.size());
  for (const LidarPoint& p : frame.points) query.push_back(icp.T_vehicle_sensor * p.position);

  struct Match {
    bool valid = false;
    Eigen::Vector3d point;
    Eigen::Vector3d normal;
    double distance = 0.0;
  };
  std::vector<Match> matches(query.size());
  const auto n_query = static_cast<std::ptrdiff_t>(query.size());

  const Matrix6d prior_info = config.Q_prior.inverse();
  LocResult result;
  result.vertex = vertex.id;
  Pose Y = prior.inverse();  // T_{m,r}
  std::vector<double> costs;
  // Same two-stage policy as odometry: ungated until converged, then gated.
  bool gated = false;
  std::size_t stage_begin = 0;
  for (int it = 1; it <= icp.max_iterations; ++it) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n_query; ++i) {
      const Eigen::Vector3d y = Y * query[i];
      const auto hit = index->Nearest(y, icp.max_correspondence_distance);
      matches[i] = hit ? Match{true, hit->point, hit->normal,
                               std::abs(hit->normal.dot(hit->point - y))}
                       : Match{};
    }
    std::vector<double> distances;
    for (const Match& m : matches) {
      if (m.valid) distances.push_back(m.distance);
    }
    const detail::RobustGate robust = detail::robust_gate(
        std::move(distances), icp.outlier_gate_sigmas, icp.min_outlier_gate);
    const double gate = gated ? robust.threshold : std::numeric_limits<double>::infinity();

    const Eigen::Matrix3d C = Y.rotation();
    LocAccumulator sys = detail::blocked_tree_sum(
        query.size(), LocAccumulator{}, [&](std::size_t begin, std::size_t end, LocAccumulator& acc) {
          for (std::size_t i = begin; i < end; ++i) {
            const Match& m = matches[i];
            if (!m.valid || m.distance > gate) continue;
            const Eigen::Vector3d e = m.point - Y * query[i];
            const Eigen::Matrix3d W = point_to_plane_weight(m.normal, icp);
            const Eigen::Matrix<double, 3, 6> J = -C * odot(query[i]);
            acc.A += J.transpose() * W * J;
            acc.b -= J.transpose() * W * e;
            acc.cost += 0.5 * e.dot(W * e);
            ++acc.matches;
          }
        });
    result.correspondences = sys.matches;
    if (sys.matches < icp.min_correspondences) break;

    const Vector6d e_prior = log_map(prior * Y);
    const Matrix6d J_prior = right_jacobian_inverse(e_prior);
    sys.A += J_prior.transpose() * prior_info * J_prior;
    sys.b -= J_prior.transpose() * prior_info * e_prior;
    sys.cost += 0.5 * e_prior.dot(prior_info * e_prior);

    const Eigen::LLT<Matrix6d> llt(sys.A);
    if (llt.info() != Eigen::Success) break;
    const Vector6d dx = llt.solve(sys.b);
    Y = Y * exp_map(dx);
    result.iterations = it;
    costs.push_back(sys.cost);

    if (dx.head<3>().norm() < icp.pose_tolerance && dx.tail<3>().norm() < icp.pose_tolerance) {
      if (gated || robust.beyond == 0) {
        result.converged = true;
        break;
      }
      gated = true;
      stage_begin = costs.size();
      continue;
    }
    const std::size_t n = costs.size();
    if (n >= stage_begin + 4 && costs[n - 1] >= costs[n - 2] && costs[n - 2] >= costs[n - 3] &&
        costs[n - 3] >= costs[n - 4]) {
      result.diverged = true;
      break;
    }
  }
  result.T_r_m = Y.inverse();
  result.solve_time = Seconds(started);
  return result;
}

// ---------------------------------------------------------------------------
// Repeat

const char* backend_name(Backend backend) {
  return backend == Backend::kDoppler ? "doppler" : "icp";
}

void RepeatConfig::Validate() const {
  if (interval < 1) throw ConfigError("repeat.interval must be >= 1");
  if (hop_radius < 1) throw ConfigError("repeat.hop_radius must be >= 1");
  if (threads < 0) throw ConfigError("repeat.threads must be non-negative");
  if (backend == Backend::kDoppler) doppler.Validate();
  icp.Validate();
  localize.Validate();
}

struct RepeatSession::State {
  // ICP odometry only learns the first frame's motion from the second frame,
  // so the first frame waits for its refined cloud.
  struct Held {
    RepeatFrame rec;
    VertexId r = 0;
    LidarFrame cloud;
  };

  State(PoseGraph g, const RepeatConfig& c) : config(c), graph(std::move(g)) {
    config.Validate();
    if (graph.teach_ids().empty()) throw InvalidArgumentError("repeat needs a taught graph");
    if (config.backend == Backend::kDoppler) {
      doppler.emplace(config.doppler, config.doppler_bias);
    } else {
      icp.emplace(config.icp);
    }
    // Closest teach vertex overall seeds the graph search.
    anchor = graph.teach_ids().front();
    double anchor_distance = std::numeric_limits<double>::infinity();
    for (VertexId v : graph.teach_ids()) {
      const double d =
          (graph.vertex(v).pose.translation() - config.initial_pose.translation()).norm();
      if (d < anchor_distance) {
        anchor = v;
        anchor_distance = d;
      }
    }
  }

  // Compounds or localizes frame `rec` at repeat vertex `r`; `cloud` is the
  // undistorted preprocessed frame when one is available.
  void Complete(RepeatFrame& rec, VertexId r, const LidarFrame* cloud) {
    const auto started = std::chrono::steady_clock::now();
    const std::size_t i = rec.index;
    rec.vertex = anchor;
    rec.T_r_m = i == 0 ? config.initial_pose.inverse() * graph.vertex(anchor).pose
                       : compound_prior(graph, r, anchor);
    if (i % config.interval == 0) {
      rec.attempted = true;
      ++out.counters.localization_attempts;
      const Pose estimate = graph.vertex(anchor).pose * rec.T_r_m.inverse();
      const VertexId m = find_nearest_vertex(graph, estimate, anchor, config.hop_radius);
      const Pose prior = i == 0 ? config.initial_pose.inverse() * graph.vertex(m).pose
                                : compound_prior(graph, r, m);
      LocResult loc;
      loc.vertex = m;
      loc.T_r_m = prior;
      if (cloud) {
        try {
          loc = localize(*cloud, graph.vertex(m), prior, config.localize);
        } catch (const DomainError&) {
        }
      }
      loc.frame = i;
      out.localizations.push_back(loc);
      if (loc.converged) {
        graph.AddEdge({EdgeType::kLocalization, m, r, loc.T_r_m});
        anchor = m;
        rec.vertex = m;
        rec.T_r_m = loc.T_r_m;
        rec.localized = true;
      } else {
        ++out.counters.localization_failures;
        if (i == 0) {
          // The initial alignment stands in so later priors can compound.
          graph.AddEdge({EdgeType::kLocalization, m, r, prior});
          anchor = m;
          rec.vertex = m;
          rec.T_r_m = prior;
        }
      }
    }
    rec.map_pose = graph.vertex(rec.vertex).pose * rec.T_r_m.inverse();
    rec.runtime += Seconds(started);
    out.frames.push_back(rec);
  }

  void Process(const FrameInput& input) {
    const ThreadScope threads(config.threads);
    const std::size_t i = next++;
    const auto started = std::chrono::steady_clock::now();
    RepeatFrame rec;
    rec.index = i;
    rec.stamp = input.frame.t_end;

    Pose delta;  // T_{r-1,r}
    LidarFrame undistorted;
    std::optional<LidarFrame> refined_first;
    bool have_cloud = false;
    try {
      if (doppler) {
        const VelocityState before = doppler->state();
        const DopplerStep step = doppler->Process(input.frame, input.gyro);
        delta = step.delta;
        if (i % config.interval == 0) {
          // The first frame has no earlier velocity; hold its own constant.
          const KnotPair knots =
              i == 0 ? KnotPair{TrajectoryKnot{Pose::Identity(), step.state.twist,
                                               input.frame.t_start},
                                TrajectoryKnot{exp_map((step.state.stamp - input.frame.t_start) *
                                                       step.state.twist),
                                               step.state.twist, step.state.stamp}}
                     : KnotPair{TrajectoryKnot{Pose::Identity(), before.twist, before.stamp},
                                TrajectoryKnot{step.delta, step.state.twist, step.state.stamp}};
          undistorted = undistort(preprocess_icp_frame(input.frame, config.icp), knots,
                                  config.icp.T_vehicle_sensor);
          have_cloud = true;
          ++out.counters.stored_cloud_touches;
        }
      } else {
        IcpStep step = icp->Process(input.frame, input.gyro);
        delta = step.delta;
        undistorted = std::move(step.undistorted);
        refined_first = std::move(step.refined_first);
        have_cloud = true;
        ++out.counters.stored_cloud_touches;
      }
    } catch (const Error& e) {
      throw EstimationError("repeat odometry failed at frame " + std::to_string(i) + ": " +
                            e.what());
    }
    rec.odometry = i == 0 ? Pose::Identity() : delta.inverse();
    const VertexId r = graph.AddRepeatVertex(
        i, rec.stamp,
        previous ? std::optional<std::pair<VertexId, Pose>>({*previous, rec.odometry})
                 : std::nullopt);
    previous = r;
    rec.runtime = Seconds(started);

    if (icp && i == 0) {
      held = Held{rec, r, std::move(undistorted)};
      return;
    }
    if (held) {
      Complete(held->rec, held->r, refined_first ? &*refined_first : &held->cloud);
      held.reset();
    }
    Complete(rec, r, have_cloud ? &undistorted : nullptr);
  }

  RepeatConfig config;
  PoseGraph graph;
  RepeatResult out;
  std::optional<DopplerOdometry> doppler;
  std::optional<IcpOdometry> icp;
  VertexId anchor = 0;
  std::optional<Held> held;
  std::optional<VertexId> previous;
  std::size_t next = 0;
};

RepeatSession::RepeatSession(PoseGraph graph, const RepeatConfig& config)
    : state_(std::make_unique<State>(std::move(graph), config)) {}
RepeatSession::~RepeatSession() = default;
RepeatSession::RepeatSession(RepeatSession&&) noexcept = default;
RepeatSession& RepeatSession::operator=(RepeatSession&&) noexcept = default;

void RepeatSession::Process(const FrameInput& input) {
  if (!state_) throw InvalidArgumentError("repeat session already finished");
  state_->Process(input);
}

void RepeatSession::Reserve(std::size_t frames) {
  if (state_) state_->out.frames.reserve(frames);
}

std::size_t RepeatSession::frames_processed() const { return state_ ? state_->next : 0; }

RepeatResult RepeatSession::Finish() {
  if (!state_) throw InvalidArgumentError("repeat session already finished");
  std::unique_ptr<State> s = std::move(state_);
  if (s->held) s->Complete(s->held->rec, s->held->r, &s->held->cloud);
  s->out.graph = std::move(s->graph);
  return std::move(s->out);
}

RepeatResult repeat(const FrameSource& source, std::size_t frame_count, PoseGraph graph,
                    const RepeatConfig& config) {
  RepeatSession session(std::move(graph), config);
  session.Reserve(frame_count);
  for (std::size_t i = 0; i < frame_count; ++i) session.Process(source(i));
  return session.Finish();
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void WritePose(std::ostream& os, const Pose& pose) {
  char buf[32];
  for (double v : pose.ToRowMajor()) {
    std::snprintf(buf, sizeof(buf), " %.17g", v);
    os << buf;
  }
}

Pose ReadPose(std::istringstream& is, const std::string& where) {
  std::array<double, 12> v{};
  for (double& x : v) {
    if (!(is >> x)) throw IoError(where + ": expected 12 pose values");
  }
  try {
    return Pose::FromRowMajor(v);
  } catch (const Error& e) {
    throw IoError(where + ": " + e.what());
  }
}

std::filesystem::path SubmapPath(const std::filesystem::path& dir, VertexId id) {
  return dir / ("submap_" + std::to_string(id) + ".dlp");
}

}  // namespace

void write_graph(const std::filesystem::path& directory, const PoseGraph& graph) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create graph directory " + directory.string() + ": " + ec.message());
  std::ofstream os(directory / kGraphFileName, std::ios::trunc);
  std::ofstream stamps(directory / kVertexStampsFileName, std::ios::trunc);
  if (!os || !stamps) throw IoError("cannot write graph files in " + directory.string());
  char buf[64];
  for (const GraphVertex& v : graph.vertices()) {
    os << "V " << v.id;
    WritePose(os, v.pose);
    os << '\n';
    std::snprintf(buf, sizeof(buf), " %.17g", v.stamp);
    stamps << v.id << buf << ' ' << v.frame << '\n';
    if (v.role == VertexRole::kTeach) write_frame(SubmapPath(directory, v.id), v.submap);
  }
  for (const GraphEdge& e : graph.edges()) {
    os << "E " << EdgeTypeName(e.type) << ' ' << e.src << ' ' << e.dst;
    WritePose(os, e.transform);
    os << '\n';
  }
  if (!os || !stamps) throw IoError("failed writing graph files in " + directory.string());
}

PoseGraph read_graph(const std::filesystem::path& directory, std::size_t k_neighbors) {
  const std::filesystem::path file = directory / kGraphFileName;
  std::ifstream is(file);
  if (!is) throw IoError("cannot open graph file " + file.string());

  struct StampLine {
    double stamp = 0.0;
    std::size_t frame = 0;
  };
  std::vector<StampLine> stamps;
  if (std::ifstream ss(directory / kVertexStampsFileName); ss) {
    std::size_t id = 0;
    StampLine line;
    while (ss >> id >> line.stamp >> line.frame) {
      if (id != stamps.size()) throw IoError("vertex stamps out of order at id " + std::to_string(id));
      stamps.push_back(line);
    }
  }

  PoseGraph graph;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = file.string() + ":" + std::to_string(line_no);
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "V") {
      GraphVertex v;
      if (!(ls >> v.id)) throw IoError(where + ": expected vertex id");
      v.pose = ReadPose(ls, where);
      if (v.id < stamps.size()) {
        v.stamp = stamps[v.id].stamp;
        v.frame = stamps[v.id].frame;
      }
      const auto submap = SubmapPath(directory, v.id);
      if (std::filesystem::exists(submap)) {
        v.role = VertexRole::kTeach;
        v.submap = read_frame(submap);
        v.index = build_submap_index(v.submap, k_neighbors);
      } else {
        v.role = VertexRole::kRepeat;
      }
      graph.AddVertex(std::move(v));
    } else if (tag == "E") {
      GraphEdge e;
      std::string type;
      if (!(ls >> type >> e.src >> e.dst)) throw IoError(where + ": expected edge type and ids");
      if (type == "odometry") {
        e.type = EdgeType::kOdometry;
      } else if (type == "localization") {
        e.type = EdgeType::kLocalization;
      } else {
        throw IoError(where + ": unknown edge type '" + type + "'");
      }
      e.transform = ReadPose(ls, where);
      graph.AddEdge(e);
    } else {
      throw IoError(where + ": unknown record '" + tag + "'");
    }
  }
  return graph;
}

}  // namespace lidarloc
