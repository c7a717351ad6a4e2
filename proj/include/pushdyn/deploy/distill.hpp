#pragma once

#include "pushdyn/rl/bundle.hpp"

namespace pushdyn::deploy {

struct DistillConfig {
  double noise_sigma = 0.05;   // Gaussian noise on observed positions/velocities
  int steps = 400;             // optimizer updates
  int rollout_horizon = 24;    // teacher steps collected per update
  int envs = 8;
  double lr = 3e-4;
  double action_scale = 0.05;
  bool init_from_teacher = true;
  bool student_privileged = false;  // student normally runs with rho zeroed
  std::uint64_t seed = 0;
  sim::SimConfig sim;
};

struct DistillResult {
  rl::PolicyBundle student;
  double initial_loss = 0;
  double final_loss = 0;
  std::vector<double> losses;
};

/// Teacher-student distillation under perturbation: on-policy teacher
/// rollouts provide targets (action mean and fusion feature, computed from
/// clean privileged observations); the student sees noise-injected clouds
/// with zeroed privileged channels and is trained to match both targets.
DistillResult distill(const rl::PolicyBundle& teacher,
                      const std::vector<gen::TaskInstance>& tasks, const DistillConfig& cfg);

}  // namespace pushdyn::deploy
