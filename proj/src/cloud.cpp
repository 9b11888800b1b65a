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

#include "lidarloc/cloud.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "lidarloc/error.hpp"
#include "lidarloc/kdtree.hpp"

namespace lidarloc {

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 19349669ULL;
    h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr char kFrameMagic[4] = {'D', 'L', 'P', '1'};

template <typename T>
T ToLittleEndian(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }
}

template <typename T>
void WriteLE(std::ostream& os, T value) {
  value = ToLittleEndian(value);
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T ReadLE(std::istream& is, const std::filesystem::path& path) {
  T value;
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw IoError("truncated frame file: " + path.string());
  }
  return ToLittleEndian(value);
}

}  // namespace

void ValidateFrame(const LidarFrame& frame) {
  if (!(frame.t_end > frame.t_start)) {
    throw InvalidArgumentError("frame t_end must be greater than t_start");
  }
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const double t = frame.points[i].timestamp;
    if (t < frame.t_start || t > frame.t_end) {
      std::ostringstream msg;
      msg << "point " << i << " timestamp " << t << " outside frame [" << frame.t_start << ", "
          << frame.t_end << "]";
      throw InvalidArgumentError(msg.str());
    }
  }
}

LidarFrame voxel_downsample(const LidarFrame& frame, double voxel_size) {
  if (!(voxel_size > 0.0)) throw InvalidArgumentError("voxel_size must be positive");
  struct Best {
    std::size_t index;
    double squared_distance;
  };
  std::unordered_map<VoxelKey, Best, VoxelKeyHash> voxels;
  voxels.reserve(frame.points.size());
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const Eigen::Vector3d& p = frame.points[i].position;
    const Eigen::Vector3d cell = (p / voxel_size).array().floor();
    const VoxelKey key{static_cast<std::int64_t>(cell.x()), static_cast<std::int64_t>(cell.y()),
                       static_cast<std::int64_t>(cell.z())};
    const Eigen::Vector3d centre = (cell.array() + 0.5) * voxel_size;
    const double d2 = (p - centre).squaredNorm();
    auto [it, inserted] = voxels.try_emplace(key, Best{i, d2});
    if (!inserted && d2 < it->second.squared_distance) it->second = Best{i, d2};
  }
  std::vector<std::size_t> keep;
  keep.reserve(voxels.size());
  for (const auto& [key, best] : voxels) keep.push_back(best.index);
  std::sort(keep.begin(), keep.end());

  LidarFrame out = frame.EmptyCopy();
  out.points.reserve(keep.size());
  for (std::size_t i : keep) out.points.push_back(frame.points[i]);
  return out;
}

LidarFrame azel_downsample(const LidarFrame& frame, std::size_t az_bins, std::size_t el_bins) {
  if (az_bins == 0 || el_bins == 0) throw InvalidArgumentError("bin counts must be >= 1");
  const double half_az = 0.5 * sensor_fov::kHorizontalDeg;
  const double half_el = 0.5 * sensor_fov::kVerticalDeg;
  std::vector<char> occupied(az_bins * el_bins, 0);
  LidarFrame out = frame.EmptyCopy();
  for (const LidarPoint& pt : frame.points) {
    const Eigen::Vector3d& p = pt.position;
    const double az = std::atan2(p.y(), p.x()) * kRadToDeg;
    const double el = std::atan2(p.z(), std::hypot(p.x(), p.y())) * kRadToDeg;
    if (std::abs(az) > half_az || std::abs(el) > half_el) continue;
    const auto a = std::min(
        az_bins - 1, static_cast<std::size_t>((az + half_az) / sensor_fov::kHorizontalDeg *
                                              static_cast<double>(az_bins)));
    const auto e = std::min(
        el_bins - 1, static_cast<std::size_t>((el + half_el) / sensor_fov::kVerticalDeg *
                                              static_cast<double>(el_bins)));
    char& cell = occupied[e * az_bins + a];
    if (cell) continue;
    cell = 1;
    out.points.push_back(pt);
  }
  return out;
}

LidarFrame extract_planar_features(const LidarFrame& frame, std::size_t k_neighbors,
                                   double score_threshold) {
  if (k_neighbors < 3) throw InvalidArgumentError("k_neighbors must be >= 3");
  if (frame.points.size() < k_neighbors) {
    throw InsufficientDataError("extract_planar_features: frame has fewer points than k");
  }
  std::vector<Eigen::Vector3d> positions;
  positions.reserve(frame.points.size());
  for (const auto& p : frame.points) positions.push_back(p.position);
  const KdTree tree(positions);

  const auto n = static_cast<std::int64_t>(frame.points.size());
  std::vector<LidarPoint> annotated(frame.points.size());
  std::vector<char> keep(frame.points.size(), 0);

#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const LidarPoint& pt = frame.points[i];
    const auto neighbors = tree.KNearest(pt.position, k_neighbors);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& nb : neighbors) mean += positions[nb.index];
    mean /= static_cast<double>(neighbors.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& nb : neighbors) {
      const Eigen::Vector3d d = positions[nb.index] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(neighbors.size());

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d lambda = eig.eigenvalues().cwiseMax(0.0);  // ascending
    if (!(lambda(2) > 0.0) || lambda(1) <= 1e-12 * lambda(2)) continue;  // rank < 2
    const double score = std::clamp(1.0 - lambda(0) / lambda(1), 0.0, 1.0);
    if (!(score > score_threshold)) continue;

    Eigen::Vector3d normal = eig.eigenvectors().col(0).normalized();
    if (normal.dot(pt.position) > 0.0) normal = -normal;
    annotated[i] = pt;
    annotated[i].normal = normal;
    annotated[i].planarity = score;
    keep[i] = 1;
  }

  LidarFrame out = frame.EmptyCopy();
  for (std::size_t i = 0; i < annotated.size(); ++i) {
    if (keep[i]) out.points.push_back(std::move(annotated[i]));
  }
  return out;
}

DopplerBiasModel fit_doppler_bias(std::span<const BiasSample> samples) {
  if (samples.size() < 2) {
    throw DegenerateFitError("fit_doppler_bias: need at least two samples");
  }
  double mean_r = 0.0, mean_b = 0.0;
  for (const auto& s : samples) {
    mean_r += s.range;
    mean_b += s.residual;
  }
  mean_r /= static_cast<double>(samples.size());
  mean_b /= static_cast<double>(samples.size());
  double srr = 0.0, srb = 0.0;
  for (const auto& s : samples) {
    const double dr = s.range - mean_r;
    srr += dr * dr;
    srb += dr * (s.residual - mean_b);
  }
  if (!(srr > 1e-12 * std::max(1.0, mean_r * mean_r) * static_cast<double>(samples.size()))) {
    throw DegenerateFitError("fit_doppler_bias: all sample ranges are identical");
  }
  DopplerBiasModel model;
  model.slope = srb / srr;
  model.intercept = mean_b - model.slope * mean_r;
  return model;
}

LidarFrame apply_doppler_bias(const LidarFrame& frame, const DopplerBiasModel& model) {
  LidarFrame out = frame;
  for (auto& p : out.points) {
    p.doppler -= model.slope * p.position.norm() + model.intercept;
  }
  return out;
}

LidarFrame transform_frame(const LidarFrame& frame, const Pose& transform) {
  LidarFrame out = frame;
  for (auto& p : out.points) {
    p.position = transform * p.position;
    if (p.normal) p.normal = transform.rotation() * *p.normal;
  }
  return out;
}

void write_frame(const std::filesystem::path& path, const LidarFrame& frame) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open frame file for writing: " + path.string());
  os.write(kFrameMagic, 4);
  WriteLE<std::uint64_t>(os, frame.points.size());
  WriteLE<double>(os, frame.t_start);
  WriteLE<double>(os, frame.t_end);
  for (const auto& p : frame.points) {
    WriteLE<double>(os, p.position.x());
    WriteLE<double>(os, p.position.y());
    WriteLE<double>(os, p.position.z());
    WriteLE<double>(os, p.timestamp);
    WriteLE<double>(os, p.doppler);
  }
  if (!os) throw IoError("failed writing frame file: " + path.string());
}

LidarFrame read_frame(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open frame file: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kFrameMagic, 4) != 0) {
    throw IoError("bad frame file magic: " + path.string());
  }
  const auto count = ReadLE<std::uint64_t>(is, path);
  LidarFrame frame;
  frame.t_start = ReadLE<double>(is, path);
  frame.t_end = ReadLE<double>(is, path);
  // Guard against absurd counts before reserving.
  if (count > (std::uint64_t{1} << 32)) throw IoError("frame point count too large: " + path.string());
  frame.points.resize(count);
  for (auto& p : frame.points) {
    p.position.x() = ReadLE<double>(is, path);
    p.position.y() = ReadLE<double>(is, path);
    p.position.z() = ReadLE<double>(is, path);
    p.timestamp = ReadLE<double>(is, path);
    p.doppler = ReadLE<double>(is, path);
  }
  return frame;
}

}  // namespace lidarloc
