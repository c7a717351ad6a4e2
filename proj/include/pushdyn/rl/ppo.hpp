#pragma once

#include <functional>
#include <optional>

#include "pushdyn/deploy/schedule.hpp"
#include "pushdyn/gen/scenegen.hpp"
#include "pushdyn/rl/obs.hpp"
#include "pushdyn/rl/policy.hpp"

namespace pushdyn::rl {

struct PPOConfig {
  double value_loss_coef = 0.5;
  bool clipped_value_loss = true;
  double clip_eps = 0.3;
  double entropy_coef = 0.006;
  int epochs = 8;
  int minibatches = 8;
  double lr = 5e-5;
  bool adaptive_lr = true;
  double desired_kl = 0.016;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double max_grad_norm = 1.0;
  int envs = 64;
  int horizon = 32;
  int episode_cap = 300;

  void validate() const {
    if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("ppo: gamma outside (0, 1]");
    if (!(clip_eps > 0)) throw std::invalid_argument("ppo: clip epsilon must be positive");
    if (envs < 1 || horizon < 1) throw std::invalid_argument("ppo: envs/horizon must be positive");
  }
};

/// Per-step GAE over one environment's horizon slice. `terminal[t]` marks a
/// true episode end (no bootstrap); `truncated[t]` marks a cut-off episode
/// whose continuation value is `trunc_value[t]`. `last_value` bootstraps the
/// horizon tail.
std::vector<double> gae_advantages(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   const std::vector<bool>& terminal,
                                   const std::vector<bool>& truncated,
                                   const std::vector<double>& trunc_value, double last_value,
                                   double gamma, double lambda);

struct CurveRow {
  int iteration = 0;
  double success_rate = 0;   // rolling window over completed episodes
  double mean_reward = 0;    // per step, this iteration
  double mean_offset_cm = 0; // rolling window, completed episodes
};

struct EpisodeOutcomeStats {
  long episodes = 0, successes = 0, drops = 0, timeouts = 0;
};

/// Everything a PPO run needs beyond the scene list.
struct PpoOptions {
  PPOConfig ppo;
  RewardConfig reward;
  PolicyConfig policy;
  sim::SimConfig sim;
  sim::CloudBudgets budgets;
  deploy::ActionSchedule schedule;
  wm::ChannelMask mask;
  bool privileged = true;
  bool no_pretrain = false;  // train the encoder jointly instead of frozen
  int iterations = 500;
  std::uint64_t seed = 0;
  std::optional<double> stop_success_rate;  // early stop when the rolling rate reaches this
  std::optional<ad::ParamTree<float>> init_policy;  // warm start (optimizer state fresh)
  int stop_min_episodes = 64;
  int curve_window_episodes = 256;
  std::function<void(const CurveRow&)> on_iteration;  // optional progress hook
  bool debug_log = false;
};

struct PpoDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PpoResult {
  ad::ParamTree<float> policy_params;
  wm::WorldModel<float> encoder;  // frozen copy, or the jointly-trained one
  PolicyConfig policy_cfg;
  std::vector<CurveRow> curve;
  EpisodeOutcomeStats outcomes;
  int iterations_run = 0;
};

/// Clipped-surrogate PPO over parallel simulator environments conditioned on
/// the world model's dynamics tokens.
PpoResult ppo_train(const std::vector<gen::TaskInstance>& tasks,
                    const wm::WorldModel<float>& encoder, const PpoOptions& opt);

}  // namespace pushdyn::rl
