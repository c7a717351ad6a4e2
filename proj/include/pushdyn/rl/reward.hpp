#pragma once

#include <cmath>
#include <stdexcept>

#include "pushdyn/sim/observe.hpp"

namespace pushdyn::rl {

struct RewardConfig {
  double sigma_contact = 0.1;
  double d_th = 0.1;          // gate: goal terms activate when d_ee < d_th
  double sigma_coarse = 0.6;
  double sigma_fine = 0.3;
  double rot_scale = 5.0;     // combined error d = d_p + d_r / rot_scale
  double tau_p = 0.05;        // success thresholds
  double tau_r = 0.1;
  double d_max = 0.1;         // obstacle-motion normalizers
  double theta_max = 0.5;
  double w_contact = 1.0;
  double w_goal = 5.0;
  double w_goal_fine = 16.0;
  double w_success = 2000.0;
  bool symmetry_aware = true;

  void validate() const {
    if (!(sigma_contact > 0 && sigma_coarse > 0 && sigma_fine > 0))
      throw std::invalid_argument("reward config: sigmas must be positive");
    if (w_contact < 0 || w_goal < 0 || w_goal_fine < 0 || w_success < 0)
      throw std::invalid_argument("reward config: weights must be nonnegative");
  }
};

struct RewardBreakdown {
  double r_contact = 0;
  double r_goal = 0;
  double r_goal_fine = 0;
  double r_success = 0;
  double total = 0;
  bool gate = false;
  double m_motion = 0;
};

// closed-form pieces, unit-testable in isolation

inline double contact_reward(double d_ee, double sigma) { return 1.0 - std::tanh(d_ee / sigma); }

inline bool gate_open(double d_ee, double d_th) { return d_ee < d_th; }

inline double combined_pose_error(double d_p, double d_r, double rot_scale) {
  return d_p + d_r / rot_scale;
}

inline double goal_reward(bool gate, double d, double sigma) {
  return gate ? 1.0 - std::tanh(d / sigma) : 0.0;
}

/// Normalized obstacle motion in [0, 1]: mean displacement and rotation of
/// non-target bodies, each clipped against its normalizer, averaged.
inline double motion_score(double mean_disp, double mean_rot, double d_max, double theta_max) {
  const double dhat = std::clamp(mean_disp / d_max, 0.0, 1.0);
  const double that = std::clamp(mean_rot / theta_max, 0.0, 1.0);
  return 0.5 * (dhat + that);
}

inline double success_scale(double m_motion) {
  return std::clamp(1.0 - 0.5 * m_motion, 0.5, 1.0);
}

/// Full reward stack for one step. `episode_start` anchors the obstacle
/// motion penalty; the gate, goal terms, and success mask come from the
/// current state.
inline RewardBreakdown compute_reward(const sim::SceneState& state,
                                      const sim::SceneState& episode_start, const Pose2& goal,
                                      const RewardConfig& cfg, const sim::SimConfig& sim_cfg) {
  cfg.validate();
  if (state.bodies.size() != episode_start.bodies.size())
    throw std::invalid_argument("compute_reward: states are not from the same episode");

  RewardBreakdown out;
  const int ti = state.target_index();
  const sim::RigidBody& target = state.bodies[static_cast<std::size_t>(ti)];
  const int sym = cfg.symmetry_aware ? target.symmetry_order : 1;

  const double d_ee = sim::ee_target_distance(state, sim_cfg);
  out.r_contact = contact_reward(d_ee, cfg.sigma_contact);
  out.gate = gate_open(d_ee, cfg.d_th);

  const double d_p = (target.pose.p - goal.p).norm();
  const double d_r = symmetric_angle_distance(target.pose.theta, goal.theta, sym);
  const double d = combined_pose_error(d_p, d_r, cfg.rot_scale);
  out.r_goal = goal_reward(out.gate, d, cfg.sigma_coarse);
  out.r_goal_fine = goal_reward(out.gate, d, cfg.sigma_fine);

  double disp_sum = 0.0, rot_sum = 0.0;
  int n_obs = 0;
  for (std::size_t i = 0; i < state.bodies.size(); ++i) {
    if (static_cast<int>(i) == ti) continue;
    disp_sum += (state.bodies[i].pose.p - episode_start.bodies[i].pose.p).norm();
    rot_sum += std::abs(wrap_angle(state.bodies[i].pose.theta - episode_start.bodies[i].pose.theta));
    n_obs += 1;
  }
  out.m_motion = n_obs > 0 ? motion_score(disp_sum / n_obs, rot_sum / n_obs, cfg.d_max, cfg.theta_max)
                           : 0.0;

  const bool success = sim::check_success(state, goal, cfg.tau_p, cfg.tau_r, sym);
  out.r_success = success ? success_scale(out.m_motion) : 0.0;

  out.total = cfg.w_contact * out.r_contact + cfg.w_goal * out.r_goal +
              cfg.w_goal_fine * out.r_goal_fine + cfg.w_success * out.r_success;
  return out;
}

}  // namespace pushdyn::rl
