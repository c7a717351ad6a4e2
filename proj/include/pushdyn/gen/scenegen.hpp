#pragma once

#include <string>
#include <vector>

#include "pushdyn/gen/asset.hpp"
#include "pushdyn/sim/config.hpp"
#include "pushdyn/sim/world.hpp"

namespace pushdyn::gen {

enum class Difficulty : int { Sparse = 0, Moderate = 1, Dense = 2 };

std::string difficulty_name(Difficulty d);
Difficulty difficulty_from_name(const std::string& name);

/// Object counts per track: {large obstacles, small obstacles}; plus one target.
struct TrackCounts {
  int large = 0;
  int small = 0;
  int total() const { return large + small + 1; }
};
TrackCounts track_counts(Difficulty d);

struct GenConfig {
  double central_x = 0.15;   // target init region half extent, x
  double central_y = 0.30;   // target init region half extent, y
  double min_goal_displacement = 0.15;
  int goal_candidates = 16;
  double placement_margin = 0.008;
  int max_attempts_per_object = 1000;
  int max_scene_restarts = 20;
  int max_goal_attempts = 4000;
  double reach_fraction = 0.92;  // goals stay inside this fraction of arm reach
  Eigen::Vector3d arm_init_q = Eigen::Vector3d(0.6, -1.8, 1.4);  // tip parked near the central region
};

struct TaskInstance {
  sim::SceneState scene;
  int target_body = 0;
  Pose2 goal;
  std::vector<Pose2> goal_candidates;
  Difficulty difficulty = Difficulty::Sparse;
  std::uint64_t seed = 0;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Goal pose for a target: planar displacement >= the configured minimum,
/// position within reach and workspace, orientation drawn from the stable set.
Pose2 sample_goal(std::uint64_t task_seed, const Pose2& target_initial,
                  const StablePoseSet& stable, double body_radius, const GenConfig& gen,
                  const sim::SimConfig& sim_cfg);

/// Procedural cluttered scene: per-track object counts, rejection-sampled
/// non-overlapping placements, stable orientations, target in the central
/// region. Deterministic per seed.
TaskInstance generate_scene(Difficulty difficulty, const AssetLibrary& library,
                            std::uint64_t seed, const GenConfig& gen,
                            const sim::SimConfig& sim_cfg);

// Scene files are JSON documents carrying everything needed to rebuild the
// TaskInstance without the asset library.
std::string task_to_json(const TaskInstance& task);
TaskInstance task_from_json(const std::string& text);
void save_task(const TaskInstance& task, const std::string& path);
TaskInstance load_task(const std::string& path);

struct BenchmarkSpec {
  int train_per_track = 256;
  int eval_per_track = 32;
  bool paper_scale = false;       // 1024 sparse-only train / 128 eval per track
  std::uint64_t train_seed_base = 10000;
  std::uint64_t eval_seed_base = 50000;
};

struct ManifestEntry {
  Difficulty difficulty;
  std::string split;  // "train" | "eval"
  std::uint64_t seed;
  std::string path;
};

struct BenchmarkManifest {
  std::vector<ManifestEntry> entries;
  std::string scale = "desk";

  std::vector<ManifestEntry> select(Difficulty d, const std::string& split) const;
};

/// Generates all scene files under `out_dir` and returns the manifest
/// (also written to out_dir/manifest.json). Train and eval seed ranges must
/// be disjoint.
BenchmarkManifest build_benchmark(const std::string& out_dir, const AssetLibrary& library,
                                  const BenchmarkSpec& spec, const GenConfig& gen,
                                  const sim::SimConfig& sim_cfg);

std::string manifest_to_json(const BenchmarkManifest& m);
BenchmarkManifest manifest_from_json(const std::string& text);
BenchmarkManifest load_manifest(const std::string& path);

}  // namespace pushdyn::gen
