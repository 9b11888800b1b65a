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
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <vector>

#include "lidarloc/cloud.hpp"
#include "lidarloc/doppler.hpp"
#include "lidarloc/geom.hpp"
#include "lidarloc/icp.hpp"

namespace lidarloc {

using VertexId = std::size_t;

enum class VertexRole { kTeach, kRepeat };
enum class EdgeType { kOdometry, kLocalization };

/// Pose-graph vertex. Teach vertices carry a submap expressed in their own
/// vehicle frame; repeat vertices stand for one live frame each.
struct GraphVertex {
  VertexId id = 0;
  VertexRole role = VertexRole::kTeach;
  /// Vehicle-to-map pose from teach odometry. Repeat vertices leave it at
  /// identity; their map pose is derived from edges.
  Pose pose;
  /// Frame-end timestamp of the frame the vertex was created at.
  double stamp = 0.0;
  /// Repeat frame index; unused for teach vertices.
  std::size_t frame = 0;
  LidarFrame submap;
  /// Nearest-neighbour index over the submap with recomputed normals.
  std::shared_ptr<const LocalMap> index;
};

/// `transform` maps src vehicle coordinates into the dst vehicle frame, so an
/// odometry edge r-1 -> r stores T_{r,r-1} and a localization edge m -> r
/// stores T_{r,m}.
struct GraphEdge {
  EdgeType type = EdgeType::kOdometry;
  VertexId src = 0;
  VertexId dst = 0;
  Pose transform;
};

class PoseGraph {
 public:
  /// Appends a teach vertex, links it to the previous teach vertex with an
  /// odometry edge and builds its submap index.
  VertexId AddTeachVertex(const Pose& pose, double stamp, LidarFrame submap,
                          std::size_t k_neighbors = PreprocessDefaults::kNeighbors);
  /// Appends a repeat vertex; `previous` links it with an odometry edge
  /// carrying T_{r,r-1}.
  VertexId AddRepeatVertex(std::size_t frame, double stamp,
                           std::optional<std::pair<VertexId, Pose>> previous);
  /// Appends a vertex as given; its id must equal size().
  VertexId AddVertex(GraphVertex vertex);
  /// Throws GraphIntegrityError on unknown endpoints.
  void AddEdge(const GraphEdge& edge);

  const GraphVertex& vertex(VertexId id) const;
  std::size_t size() const { return vertices_.size(); }
  const std::vector<GraphVertex>& vertices() const { return vertices_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  /// Teach vertex ids in creation order.
  const std::vector<VertexId>& teach_ids() const { return teach_ids_; }
  const std::vector<VertexId>& repeat_ids() const { return repeat_ids_; }

  /// Edge indices touching `id`.
  const std::vector<std::size_t>& incident(VertexId id) const;
  /// The edge of `type` joining a and b in either direction, as T_{a,b}.
  std::optional<Pose> Transform(VertexId a, VertexId b, EdgeType type) const;

 private:
  std::vector<GraphVertex> vertices_;
  std::vector<GraphEdge> edges_;
  std::vector<std::vector<std::size_t>> incident_;
  std::vector<VertexId> teach_ids_;
  std::vector<VertexId> repeat_ids_;
};

/// Nearest-neighbour index over submap points whose normals can be
/// recomputed by PCA. Deterministic in the stored points, so a reloaded graph
/// matches exactly.
std::shared_ptr<const LocalMap> build_submap_index(const LidarFrame& submap,
                                                   std::size_t k_neighbors);

struct VertexThresholds {
  double translation = 10.0;                          // m
  double rotation = 30.0 * std::numbers::pi / 180.0;  // rad
  void Validate() const;
};

/// Teach-pass bookkeeping fed with undistorted frames and their odometry
/// poses. A vertex is created at the first frame and whenever the motion
/// since the last vertex reaches either threshold.
class TeachBuilder {
 public:
  TeachBuilder(VertexThresholds thresholds, Pose T_vehicle_sensor, double voxel_size,
               std::size_t k_neighbors, double planarity_threshold);

  /// `undistorted` is expressed in the sensor frame at `stamp`; `pose` maps
  /// that frame's vehicle coordinates into the map. Returns the new vertex id
  /// when one was created.
  std::optional<VertexId> Add(const LidarFrame& undistorted, const Pose& pose, double stamp);

  const PoseGraph& graph() const { return graph_; }
  PoseGraph Release() { return std::move(graph_); }

 private:
  struct Recent {
    LidarFrame cloud;
    Pose pose;
  };

  LidarFrame BuildSubmap(const Pose& vertex_pose) const;

  VertexThresholds thresholds_;
  Pose T_vehicle_sensor_;
  double voxel_size_;
  std::size_t k_neighbors_;
  double planarity_threshold_;
  std::deque<Recent> recent_;
  std::optional<Pose> last_vertex_pose_;
  PoseGraph graph_;
};

/// Frame `index` of a sequence with its gyro samples. Rendering on demand
/// keeps long routes out of memory.
struct FrameInput {
  LidarFrame frame;
  std::vector<GyroSample> gyro;
};
using FrameSource = std::function<FrameInput(std::size_t index)>;

/// ICP odometry over `frame_count` frames from `source`, feeding a
/// TeachBuilder. `start_pose` anchors the map frame. Throws EstimationError
/// naming the frame index when odometry diverges or fails.
PoseGraph teach(const FrameSource& source, std::size_t frame_count, const IcpConfig& config,
                const VertexThresholds& thresholds, const Pose& start_pose = Pose::Identity());

/// Teach vertex minimizing translational distance to `estimate`, searched by
/// breadth-first expansion over teach odometry edges up to `hop_radius` hops
/// from `start`. Ties resolve to the smaller id.
VertexId find_nearest_vertex(const PoseGraph& graph, const Pose& estimate, VertexId start,
                             std::size_t hop_radius = 5);

/// Prior T_{r,m} chained through the graph from the most recent localization
/// edge at or before repeat vertex `r`: odometry edges back to the anchor
/// frame, its localization edge, then teach edges to `m`. Throws
/// GraphIntegrityError when any link is missing.
Pose compound_prior(const PoseGraph& graph, VertexId r, VertexId m);

struct LocalizeConfig {
  IcpConfig icp;
  /// Prior covariance on T_{r,m} (translation then rotation).
  Matrix6d Q_prior = (Vector6d() << 1, 1, 1, 0.1, 0.1, 0.1).finished().asDiagonal();
  void Validate() const;
};

struct LocResult {
  std::size_t frame = 0;
  VertexId vertex = 0;
  Pose T_r_m;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  std::size_t correspondences = 0;
  double solve_time = 0.0;  // s
};

/// Gauss-Newton on T_{r,m} with a prior factor at `prior` and point-to-plane
/// factors against the vertex submap. `frame` is undistorted and expressed in
/// the sensor frame; points without normals are still used as queries.
/// Throws DomainError when the prior rotation is at or beyond pi.
LocResult localize(const LidarFrame& frame, const GraphVertex& vertex, const Pose& prior,
                   const LocalizeConfig& config);

enum class Backend { kDoppler, kIcp };
const char* backend_name(Backend backend);

struct RepeatConfig {
  std::size_t interval = 1;
  Backend backend = Backend::kDoppler;
  DopplerConfig doppler;
  DopplerBiasModel doppler_bias;
  IcpConfig icp;
  LocalizeConfig localize;
  /// Vehicle-to-map pose at the end of the first repeat frame.
  Pose initial_pose;
  std::size_t hop_radius = 5;
  /// OpenMP workers for the point-parallel sections; 0 keeps the current setting.
  int threads = 0;
  void Validate() const;
};

struct RepeatFrame {
  std::size_t index = 0;
  double stamp = 0.0;
  /// Teach vertex the estimate is expressed against and T_{r,m}.
  VertexId vertex = 0;
  Pose T_r_m;
  /// Vehicle-to-map pose implied by T_{r,m} and the vertex pose.
  Pose map_pose;
  Pose odometry;  // T_{r,r-1}; identity for the first frame
  bool attempted = false;
  bool localized = false;
  double runtime = 0.0;  // s, odometry + preprocessing + localization
};

struct RepeatCounters {
  std::size_t localization_attempts = 0;
  std::size_t localization_failures = 0;
  /// Preprocessed clouds written to or read from the live-cloud store.
  std::size_t stored_cloud_touches = 0;
};

struct RepeatResult {
  std::vector<RepeatFrame> frames;
  std::vector<LocResult> localizations;
  RepeatCounters counters;
  PoseGraph graph;
};

/// Runs the chosen odometry on every frame and localizes on frames whose
/// index is a multiple of `interval`. `graph` must hold the teach pass.
RepeatResult repeat(const FrameSource& source, std::size_t frame_count, PoseGraph graph,
                    const RepeatConfig& config);

/// Frame-at-a-time form of repeat(): frames are fed in index order and give
/// the same estimates as repeat() on the same inputs.
class RepeatSession {
 public:
  RepeatSession(PoseGraph graph, const RepeatConfig& config);
  ~RepeatSession();
  RepeatSession(RepeatSession&&) noexcept;
  RepeatSession& operator=(RepeatSession&&) noexcept;

  void Reserve(std::size_t frames);
  void Process(const FrameInput& input);
  std::size_t frames_processed() const;
  /// Completes any frame still waiting and hands over the result; the
  /// session cannot be used afterwards.
  RepeatResult Finish();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

/// `V id pose12` and `E type src dst pose12` lines with row-major poses;
/// teach vertex submaps go to sibling `submap_<id>.dlp` files and vertex
/// stamps to a `vertex_stamps.txt` sidecar.
void write_graph(const std::filesystem::path& directory, const PoseGraph& graph);
/// Vertices with a sibling submap file load as teach vertices.
PoseGraph read_graph(const std::filesystem::path& directory,
                     std::size_t k_neighbors = PreprocessDefaults::kNeighbors);

inline constexpr const char* kGraphFileName = "graph.txt";
inline constexpr const char* kVertexStampsFileName = "vertex_stamps.txt";

}  // namespace lidarloc
