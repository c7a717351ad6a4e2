#pragma once

#include <string>
#include <vector>

#include "pushdyn/cur/curriculum.hpp"
#include "pushdyn/deploy/distill.hpp"
#include "pushdyn/io/config_json.hpp"
#include "pushdyn/wm/train.hpp"

namespace pushdyn::io {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Whole-run configuration: one JSON document merging every subsystem's
/// knobs, a scale preset, and override layers (file < environment < CLI).
/// Unknown keys are rejected with their full path.
struct RunConfig {
  std::string scale = "desk";
  std::uint64_t seed = 0;
  int workers = 1;

  sim::SimConfig sim;
  sim::CloudBudgets budgets;
  wm::WMConfig wm;
  rl::RewardConfig reward;
  rl::PPOConfig ppo;
  rl::PolicyConfig policy;
  deploy::ActionSchedule schedule;
  deploy::ClipConfig clip;
  gen::GenConfig gen;
  gen::BenchmarkSpec benchmark;

  struct WmTrainOpts {
    int epochs = 10;
    int batch = 32;
    double lr = 1e-3;
    double lr_min = 1e-4;
    double heldout_frac = 0.1;
  } wm_train;

  struct TrainOpts {
    int iterations = 500;
    bool privileged = true;
    bool no_pretrain = false;
  } train;

  struct CurriculumOpts {
    int rounds = 2;
    long collect_steps = 10000;
    double bootstrap_threshold_pct = 10.0;
    int bootstrap_iterations = 200;
    int ppo_iterations = 150;
    int wm_epochs = 8;
    double replay_fraction = 0.25;
    int heldout_episodes = 8;
    int eval_scenes = 16;
  } curriculum;

  struct EvalOpts {
    int episode_cap = 300;
    int goals_per_scene = 1;
  } eval;

  struct DistillOpts {
    double noise_sigma = 0.05;
    int steps = 400;
    int envs = 8;
    int rollout_horizon = 24;
    double lr = 3e-4;
    double action_scale = 0.05;
    bool init_from_teacher = true;
  } distill;

  struct CollectOpts {
    double action_scale = 0.05;
  } collect;

  json to_json() const;
  std::string canonical_text() const { return to_json().dump(2); }
  std::string hash8() const;

  /// Builds the config by layering: scale preset -> file -> environment
  /// variables (PUSHDYN_a__b=value) -> explicit overrides ("a.b=value").
  static RunConfig load(const std::string& path, const std::string& scale_override,
                        const std::vector<std::string>& overrides);

  void apply_json(const json& j);  // validates keys, merges values
};

}  // namespace pushdyn::io
