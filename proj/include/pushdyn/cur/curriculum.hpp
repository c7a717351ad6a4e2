#pragma once

#include "pushdyn/cur/episode.hpp"
#include "pushdyn/rl/bundle.hpp"
#include "pushdyn/rl/eval.hpp"
#include "pushdyn/wm/train.hpp"

namespace pushdyn::cur {

struct CollectOptions {
  sim::SimConfig sim;
  sim::CloudBudgets budgets;
  double action_scale = 0.05;  // stochastic rollouts keep exploration noise on
  int episode_cap = 300;
  std::uint64_t seed = 0;
};

/// Rolls the (stochastic) policy until at least `step_budget` steps are
/// recorded, finishing the in-flight episode. One episode file per episode
/// plus a manifest with content hashes.
DatasetManifest collect_rollouts(const rl::PolicyBundle& policy,
                                 const std::vector<gen::TaskInstance>& tasks, long step_budget,
                                 const std::string& out_dir, const CollectOptions& opt);

std::vector<wm::WmSample> load_samples(const std::string& dataset_dir, const DatasetManifest& m);

struct CurriculumConfig {
  int rounds = 2;
  long collect_steps = 10000;
  double bootstrap_threshold_pct = 10.0;
  int bootstrap_iterations = 200;
  int ppo_iterations = 150;
  int wm_epochs = 8;
  double replay_fraction = 0.25;  // share of older rollouts mixed into later updates
  int heldout_episodes = 8;       // fixed held-out rollouts for the error trend
  int eval_goals_per_scene = 1;
  int eval_scenes = 16;
  double stop_success_delta_pct = 1.0;
  double stop_wm_delta_frac = 0.05;

  wm::WMConfig wm;
  wm::WmTrainConfig wm_train;
  rl::PpoOptions ppo;  // template for both bootstrap and per-round training
};

struct RoundMetrics {
  int round = 0;
  double success_rate_pct = 0;
  double wm_heldout_cm = 0;
  std::string wm_hash;
  std::string policy_hash;
  std::string wm_parent_hash;
};

struct CurriculumState {
  std::vector<RoundMetrics> rounds;
  std::vector<std::string> completed_stages;
  bool bootstrap_reached_threshold = false;
  bool converged = false;

  bool stage_done(const std::string& key) const {
    for (const auto& s : completed_stages)
      if (s == key) return true;
    return false;
  }
};

void save_curriculum_state(const CurriculumState& s, const std::string& path);
CurriculumState load_curriculum_state(const std::string& path);

/// The alternating loop: bootstrap policy -> collect -> (re)train the world
/// model (warm started) -> retrain the policy on the refreshed frozen encoder
/// -> evaluate. State and artifacts persist after every stage, so an
/// interrupted run resumes to identical results given the same seeds.
CurriculumState run_curriculum(const std::vector<gen::TaskInstance>& train_tasks,
                               const std::vector<gen::TaskInstance>& eval_tasks,
                               const CurriculumConfig& cfg, const std::string& out_dir,
                               std::uint64_t seed);

}  // namespace pushdyn::cur
