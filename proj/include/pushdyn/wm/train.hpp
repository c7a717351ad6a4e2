#pragma once

#include <vector>

#include "pushdyn/wm/model.hpp"

namespace pushdyn::wm {

/// One supervised transition: cloud at t, end-effector flow over [t, t+dt],
/// and per-point ground truth at t+dt aligned with the cloud rows.
struct WmSample {
  PhysPointCloud cloud;
  Eigen::Vector3d action = Eigen::Vector3d::Zero();
  Eigen::MatrixX3d next_positions;
  Eigen::MatrixX3d next_velocities;
  std::vector<int> point_body;  // body id per point, -1 for pad/end-effector
};

enum class Pretext { WorldModel, Reconstruction };
enum class Granularity { Point, Object };

struct WmTrainConfig {
  int epochs = 10;
  int batch = 32;
  double lr = 1e-3;
  double lr_min = 1e-4;  // cosine decay floor
  double heldout_frac = 0.1;
  std::uint64_t seed = 0;
  ChannelMask mask;
  Pretext pretext = Pretext::WorldModel;
  Granularity granularity = Granularity::Point;
};

struct WmEpochMetrics {
  int epoch = 0;
  double l_pos = 0, l_vel = 0, l_var = 0;
  double heldout_chamfer_cm = 0;
};

struct WmTrainResult {
  WorldModel<float> model;
  std::vector<WmEpochMetrics> metrics;
};

/// Adam training with running-stat input normalization; reports held-out
/// position error as Chamfer distance in centimeters. `warm_start` continues
/// from an existing model (stats keep streaming).
WmTrainResult train_world_model(const std::vector<WmSample>& samples, const WMConfig& cfg,
                                const WmTrainConfig& tc,
                                const WorldModel<float>* warm_start = nullptr);

struct DynPredictionRaw {
  Eigen::MatrixX3d positions;
  Eigen::MatrixX3d velocities;
};

/// Single-sample inference in raw units.
DynPredictionRaw predict(const WorldModel<float>& model, const PhysPointCloud& cloud,
                         const Eigen::Vector3d& action, std::uint64_t tokenize_seed = 0);

/// Held-out Chamfer position error (cm) of a model over samples.
double heldout_chamfer_cm(const WorldModel<float>& model, const std::vector<WmSample>& samples,
                          const ChannelMask& mask, std::uint64_t tokenize_seed = 0);

}  // namespace pushdyn::wm
