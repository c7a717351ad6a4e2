#pragma once

#include <string>
#include <vector>

#include "pushdyn/gen/scenegen.hpp"
#include "pushdyn/rl/reward.hpp"
#include "pushdyn/sim/observe.hpp"
#include "pushdyn/wm/train.hpp"

namespace pushdyn::cur {

/// One recorded control step: observation cloud (with per-point provenance),
/// the executed action, the end-effector flow over the step, the reward
/// terms, and the ground-truth state the cloud was rendered from.
struct EpisodeStep {
  Eigen::Vector3d action = Eigen::Vector3d::Zero();
  Eigen::Vector3d ee_flow = Eigen::Vector3d::Zero();
  rl::RewardBreakdown reward;
  sim::SceneState snapshot;  // state at this step, before the action
  PhysPointCloud cloud;
  std::vector<sim::PointSource> sources;
};

struct EpisodeRecord {
  gen::TaskInstance task;  // initial scene (static parameters live here)
  Pose2 goal;
  std::string outcome;  // "success" | "drop" | "timeout"
  sim::CloudBudgets budgets;
  sim::SimConfig sim;
  std::vector<EpisodeStep> steps;
  sim::SceneState final_snapshot;
  PhysPointCloud final_cloud;
  std::vector<sim::PointSource> final_sources;

  int step_count() const { return static_cast<int>(steps.size()); }
};

void save_episode(const EpisodeRecord& ep, const std::string& path);
EpisodeRecord load_episode(const std::string& path);

struct DatasetManifest {
  std::vector<std::string> files;          // relative paths
  std::vector<std::uint64_t> hashes;       // FNV-1a of each file
  long total_steps = 0;
};

void save_dataset_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_dataset_manifest(const std::string& path);

/// Converts an episode into world-model supervision pairs: for every step t,
/// the cloud at t, the end-effector flow over [t, t+1], and the positions and
/// velocities at t+1 of exactly the points selected at t.
std::vector<wm::WmSample> episode_to_samples(const EpisodeRecord& ep);

/// Re-steps every stored (state, action) through the simulator and renders;
/// returns false as soon as a re-rendered cloud differs from the stored one
/// at f32 precision.
bool replay_matches(const EpisodeRecord& ep);

}  // namespace pushdyn::cur
