#pragma once

#include <json.hpp>

#include "pushdyn/deploy/clip.hpp"
#include "pushdyn/deploy/schedule.hpp"
#include "pushdyn/gen/scenegen.hpp"
#include "pushdyn/rl/policy.hpp"
#include "pushdyn/rl/ppo.hpp"
#include "pushdyn/sim/config.hpp"
#include "pushdyn/wm/config.hpp"

namespace pushdyn::io {

using nlohmann::json;

inline json to_json(const sim::SimConfig& c) {
  return json{{"dt", c.dt},
              {"substeps", c.substeps},
              {"velocity_iterations", c.velocity_iterations},
              {"position_iterations", c.position_iterations},
              {"contact_slop", c.contact_slop},
              {"position_beta", c.position_beta},
              {"restitution_threshold", c.restitution_threshold},
              {"gravity", c.gravity},
              {"workspace_half", c.workspace_half},
              {"action_bound", c.action_bound},
              {"joint_kp", {c.joint_kp[0], c.joint_kp[1], c.joint_kp[2]}},
              {"joint_kd", {c.joint_kd[0], c.joint_kd[1], c.joint_kd[2]}},
              {"joint_inertia", {c.joint_inertia[0], c.joint_inertia[1], c.joint_inertia[2]}},
              {"joint_limit", {c.joint_limit[0], c.joint_limit[1], c.joint_limit[2]}},
              {"arm_base", {c.arm_base[0], c.arm_base[1]}},
              {"arm_base_theta", c.arm_base_theta},
              {"ee_friction", c.ee_friction},
              {"ee_cloud_mass", c.ee_cloud_mass},
              {"ground_rot_radius_coeff", c.ground_rot_radius_coeff},
              {"stick_speed", c.stick_speed}};
}

inline void from_json_into(const json& j, sim::SimConfig& c) {
  c.dt = j.value("dt", c.dt);
  c.substeps = j.value("substeps", c.substeps);
  c.velocity_iterations = j.value("velocity_iterations", c.velocity_iterations);
  c.position_iterations = j.value("position_iterations", c.position_iterations);
  c.contact_slop = j.value("contact_slop", c.contact_slop);
  c.position_beta = j.value("position_beta", c.position_beta);
  c.restitution_threshold = j.value("restitution_threshold", c.restitution_threshold);
  c.gravity = j.value("gravity", c.gravity);
  c.workspace_half = j.value("workspace_half", c.workspace_half);
  c.action_bound = j.value("action_bound", c.action_bound);
  auto vec3 = [&](const char* key, Eigen::Vector3d& v) {
    if (j.contains(key))
      for (int i = 0; i < 3; ++i) v[i] = j.at(key).at(static_cast<std::size_t>(i)).get<double>();
  };
  vec3("joint_kp", c.joint_kp);
  vec3("joint_kd", c.joint_kd);
  vec3("joint_inertia", c.joint_inertia);
  vec3("joint_limit", c.joint_limit);
  if (j.contains("arm_base")) {
    c.arm_base[0] = j.at("arm_base").at(0).get<double>();
    c.arm_base[1] = j.at("arm_base").at(1).get<double>();
  }
  c.arm_base_theta = j.value("arm_base_theta", c.arm_base_theta);
  c.ee_friction = j.value("ee_friction", c.ee_friction);
  c.ee_cloud_mass = j.value("ee_cloud_mass", c.ee_cloud_mass);
  c.ground_rot_radius_coeff = j.value("ground_rot_radius_coeff", c.ground_rot_radius_coeff);
  c.stick_speed = j.value("stick_speed", c.stick_speed);
}

inline json to_json(const sim::CloudBudgets& b) {
  return json{{"target", b.target}, {"obstacle", b.obstacle}, {"end_effector", b.end_effector}};
}

inline void from_json_into(const json& j, sim::CloudBudgets& b) {
  b.target = j.value("target", b.target);
  b.obstacle = j.value("obstacle", b.obstacle);
  b.end_effector = j.value("end_effector", b.end_effector);
}

inline json to_json(const wm::WMConfig& c) {
  return json{{"patches_target", c.patches_target},
              {"patches_obstacle", c.patches_obstacle},
              {"patches_ee", c.patches_ee},
              {"k", c.k},
              {"dim", c.dim},
              {"blocks", c.blocks},
              {"heads", c.heads},
              {"dt", c.dt},
              {"lambda_pos", c.lambda_pos},
              {"lambda_vel", c.lambda_vel},
              {"lambda_var", c.lambda_var},
              {"var_matches_std", c.var_matches_std}};
}

inline void from_json_into(const json& j, wm::WMConfig& c) {
  c.patches_target = j.value("patches_target", c.patches_target);
  c.patches_obstacle = j.value("patches_obstacle", c.patches_obstacle);
  c.patches_ee = j.value("patches_ee", c.patches_ee);
  c.k = j.value("k", c.k);
  c.dim = j.value("dim", c.dim);
  c.blocks = j.value("blocks", c.blocks);
  c.heads = j.value("heads", c.heads);
  c.dt = j.value("dt", c.dt);
  c.lambda_pos = j.value("lambda_pos", c.lambda_pos);
  c.lambda_vel = j.value("lambda_vel", c.lambda_vel);
  c.lambda_var = j.value("lambda_var", c.lambda_var);
  c.var_matches_std = j.value("var_matches_std", c.var_matches_std);
}

inline json to_json(const rl::RewardConfig& c) {
  return json{{"sigma_contact", c.sigma_contact},
              {"d_th", c.d_th},
              {"sigma_coarse", c.sigma_coarse},
              {"sigma_fine", c.sigma_fine},
              {"rot_scale", c.rot_scale},
              {"tau_p", c.tau_p},
              {"tau_r", c.tau_r},
              {"d_max", c.d_max},
              {"theta_max", c.theta_max},
              {"w_contact", c.w_contact},
              {"w_goal", c.w_goal},
              {"w_goal_fine", c.w_goal_fine},
              {"w_success", c.w_success},
              {"symmetry_aware", c.symmetry_aware}};
}

inline void from_json_into(const json& j, rl::RewardConfig& c) {
  c.sigma_contact = j.value("sigma_contact", c.sigma_contact);
  c.d_th = j.value("d_th", c.d_th);
  c.sigma_coarse = j.value("sigma_coarse", c.sigma_coarse);
  c.sigma_fine = j.value("sigma_fine", c.sigma_fine);
  c.rot_scale = j.value("rot_scale", c.rot_scale);
  c.tau_p = j.value("tau_p", c.tau_p);
  c.tau_r = j.value("tau_r", c.tau_r);
  c.d_max = j.value("d_max", c.d_max);
  c.theta_max = j.value("theta_max", c.theta_max);
  c.w_contact = j.value("w_contact", c.w_contact);
  c.w_goal = j.value("w_goal", c.w_goal);
  c.w_goal_fine = j.value("w_goal_fine", c.w_goal_fine);
  c.w_success = j.value("w_success", c.w_success);
  c.symmetry_aware = j.value("symmetry_aware", c.symmetry_aware);
}

inline json to_json(const rl::PPOConfig& c) {
  return json{{"value_loss_coef", c.value_loss_coef},
              {"clipped_value_loss", c.clipped_value_loss},
              {"clip_eps", c.clip_eps},
              {"entropy_coef", c.entropy_coef},
              {"epochs", c.epochs},
              {"minibatches", c.minibatches},
              {"lr", c.lr},
              {"adaptive_lr", c.adaptive_lr},
              {"desired_kl", c.desired_kl},
              {"gamma", c.gamma},
              {"gae_lambda", c.gae_lambda},
              {"max_grad_norm", c.max_grad_norm},
              {"envs", c.envs},
              {"horizon", c.horizon},
              {"episode_cap", c.episode_cap}};
}

inline void from_json_into(const json& j, rl::PPOConfig& c) {
  c.value_loss_coef = j.value("value_loss_coef", c.value_loss_coef);
  c.clipped_value_loss = j.value("clipped_value_loss", c.clipped_value_loss);
  c.clip_eps = j.value("clip_eps", c.clip_eps);
  c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  c.epochs = j.value("epochs", c.epochs);
  c.minibatches = j.value("minibatches", c.minibatches);
  c.lr = j.value("lr", c.lr);
  c.adaptive_lr = j.value("adaptive_lr", c.adaptive_lr);
  c.desired_kl = j.value("desired_kl", c.desired_kl);
  c.gamma = j.value("gamma", c.gamma);
  c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.envs = j.value("envs", c.envs);
  c.horizon = j.value("horizon", c.horizon);
  c.episode_cap = j.value("episode_cap", c.episode_cap);
}

inline json to_json(const rl::PolicyConfig& c) {
  return json{{"fusion_hidden", c.fusion_hidden},
              {"head_hidden", c.head_hidden},
              {"xattn_heads", c.xattn_heads},
              {"action_dim", c.action_dim},
              {"init_log_std", c.init_log_std}};
}

inline void from_json_into(const json& j, rl::PolicyConfig& c) {
  if (j.contains("fusion_hidden")) c.fusion_hidden = j.at("fusion_hidden").get<std::vector<int>>();
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.xattn_heads = j.value("xattn_heads", c.xattn_heads);
  c.action_dim = j.value("action_dim", c.action_dim);
  c.init_log_std = j.value("init_log_std", c.init_log_std);
}

inline json to_json(const deploy::ActionSchedule& c) {
  return json{{"initial", c.initial},
              {"final", c.final_scale},
              {"decay_iterations", c.decay_iterations}};
}

inline void from_json_into(const json& j, deploy::ActionSchedule& c) {
  c.initial = j.value("initial", c.initial);
  c.final_scale = j.value("final", c.final_scale);
  c.decay_iterations = j.value("decay_iterations", c.decay_iterations);
}

inline json to_json(const deploy::ClipConfig& c) {
  return json{{"eps_x", c.eps_x}, {"lambda", c.lambda}};
}

inline void from_json_into(const json& j, deploy::ClipConfig& c) {
  c.eps_x = j.value("eps_x", c.eps_x);
  c.lambda = j.value("lambda", c.lambda);
}

inline json to_json(const gen::GenConfig& c) {
  return json{{"central_x", c.central_x},
              {"central_y", c.central_y},
              {"min_goal_displacement", c.min_goal_displacement},
              {"goal_candidates", c.goal_candidates},
              {"placement_margin", c.placement_margin},
              {"max_attempts_per_object", c.max_attempts_per_object},
              {"max_scene_restarts", c.max_scene_restarts},
              {"max_goal_attempts", c.max_goal_attempts},
              {"reach_fraction", c.reach_fraction},
              {"arm_init_q", {c.arm_init_q[0], c.arm_init_q[1], c.arm_init_q[2]}}};
}

inline void from_json_into(const json& j, gen::GenConfig& c) {
  c.central_x = j.value("central_x", c.central_x);
  c.central_y = j.value("central_y", c.central_y);
  c.min_goal_displacement = j.value("min_goal_displacement", c.min_goal_displacement);
  c.goal_candidates = j.value("goal_candidates", c.goal_candidates);
  c.placement_margin = j.value("placement_margin", c.placement_margin);
  c.max_attempts_per_object = j.value("max_attempts_per_object", c.max_attempts_per_object);
  c.max_scene_restarts = j.value("max_scene_restarts", c.max_scene_restarts);
  c.max_goal_attempts = j.value("max_goal_attempts", c.max_goal_attempts);
  c.reach_fraction = j.value("reach_fraction", c.reach_fraction);
  if (j.contains("arm_init_q"))
    for (int i = 0; i < 3; ++i) c.arm_init_q[i] = j.at("arm_init_q").at(static_cast<std::size_t>(i)).get<double>();
}

}  // namespace pushdyn::io
