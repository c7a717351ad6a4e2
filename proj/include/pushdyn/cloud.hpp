#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pushdyn {

enum class PointLabel : std::uint8_t { Target = 0, Obstacle = 1, EndEffector = 2 };

constexpr int kCloudChannels = 7;  // x y z m vx vy vz

/// Physical point cloud: one row per point, channels (x, y, z, m, vx, vy, vz).
/// Column-major storage so each channel is contiguous. Kept in double
/// in-memory; the on-disk record is f32 (see cloud_io.hpp).
struct PhysPointCloud {
  using Feats = Eigen::Matrix<double, Eigen::Dynamic, kCloudChannels>;

  Feats feats;
  std::vector<PointLabel> labels;

  PhysPointCloud() = default;
  explicit PhysPointCloud(int n)
      : feats(Feats::Zero(n, kCloudChannels)),
        labels(static_cast<std::size_t>(n), PointLabel::Target) {}

  int size() const { return static_cast<int>(feats.rows()); }

  auto positions() { return feats.leftCols<3>(); }
  auto positions() const { return feats.leftCols<3>(); }
  auto masses() { return feats.col(3); }
  auto masses() const { return feats.col(3); }
  auto velocities() { return feats.rightCols<3>(); }
  auto velocities() const { return feats.rightCols<3>(); }

  void validate() const {
    if (size() == 0) throw std::invalid_argument("cloud: empty");
    if (labels.size() != static_cast<std::size_t>(size()))
      throw std::invalid_argument("cloud: label count mismatch");
    if (!feats.allFinite()) throw std::invalid_argument("cloud: non-finite feature");
    if ((feats.col(3).array() < 0.0).any()) throw std::invalid_argument("cloud: negative mass");
  }

  std::vector<int> indices_with_label(PointLabel l) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (labels[static_cast<std::size_t>(i)] == l) out.push_back(i);
    return out;
  }

  void append(const PhysPointCloud& other) {
    const int n = size(), m = other.size();
    Feats merged(n + m, kCloudChannels);
    merged.topRows(n) = feats;
    merged.bottomRows(m) = other.feats;
    feats = std::move(merged);
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  }

  PhysPointCloud subset(const std::vector<int>& idx) const {
    PhysPointCloud out(static_cast<int>(idx.size()));
    for (int i = 0; i < out.size(); ++i) {
      const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
      out.feats.row(i) = feats.row(static_cast<int>(j));
      out.labels[static_cast<std::size_t>(i)] = labels[j];
    }
    return out;
  }
};

/// Streaming per-channel statistics (Welford). std() is clamped below by
/// `epsilon` so constant channels (z and vz in planar scenes) stay usable.
struct NormStats {
  Eigen::Array<double, kCloudChannels, 1> mean = Eigen::Array<double, kCloudChannels, 1>::Zero();
  Eigen::Array<double, kCloudChannels, 1> m2 = Eigen::Array<double, kCloudChannels, 1>::Zero();
  std::int64_t count = 0;
  double epsilon = 1e-6;

  Eigen::Array<double, kCloudChannels, 1> std() const {
    if (count <= 0) return Eigen::Array<double, kCloudChannels, 1>::Ones();
    return (m2 / static_cast<double>(count)).sqrt().max(epsilon);
  }

  void validate() const {
    if ((std() <= 0.0).any()) throw std::invalid_argument("norm stats: nonpositive std");
    if (!mean.isFinite().all()) throw std::invalid_argument("norm stats: non-finite mean");
  }
};

inline NormStats update_running_stats(NormStats stats, const PhysPointCloud& cloud) {
  for (int i = 0; i < cloud.size(); ++i) {
    stats.count += 1;
    const Eigen::Array<double, kCloudChannels, 1> x = cloud.feats.row(i).transpose().array();
    const Eigen::Array<double, kCloudChannels, 1> d = x - stats.mean;
    stats.mean += d / static_cast<double>(stats.count);
    stats.m2 += d * (x - stats.mean);
  }
  return stats;
}

inline PhysPointCloud normalize(const PhysPointCloud& cloud, const NormStats& stats) {
  stats.validate();
  PhysPointCloud out = cloud;
  const Eigen::Array<double, kCloudChannels, 1> mean = stats.mean;
  const Eigen::Array<double, kCloudChannels, 1> std = stats.std();
  for (int c = 0; c < kCloudChannels; ++c)
    out.feats.col(c) = (out.feats.col(c).array() - mean[c]) / std[c];
  return out;
}

inline PhysPointCloud denormalize(const PhysPointCloud& cloud, const NormStats& stats) {
  stats.validate();
  PhysPointCloud out = cloud;
  const Eigen::Array<double, kCloudChannels, 1> mean = stats.mean;
  const Eigen::Array<double, kCloudChannels, 1> std = stats.std();
  for (int c = 0; c < kCloudChannels; ++c)
    out.feats.col(c) = out.feats.col(c).array() * std[c] + mean[c];
  return out;
}

/// Distributes `total_mass` uniformly over all points.
inline PhysPointCloud assign_mass(const PhysPointCloud& cloud, double total_mass) {
  if (!(total_mass > 0.0)) throw std::invalid_argument("assign_mass: total mass must be positive");
  if (cloud.size() == 0) throw std::invalid_argument("assign_mass: empty cloud");
  PhysPointCloud out = cloud;
  out.masses().setConstant(total_mass / cloud.size());
  return out;
}

}  // namespace pushdyn
