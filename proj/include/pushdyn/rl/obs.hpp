#pragma once

#include "pushdyn/rl/reward.hpp"
#include "pushdyn/wm/model.hpp"

namespace pushdyn::rl {

// Planar observation layout (version "planar-v1"):
//   hand state      4  (ee x, y, cos(theta), sin(theta))
//   robot state     6  (q, qdot)
//   relative goal   4  (goal in the object frame: dx, dy, cos(dtheta), sin(dtheta))
//   physics rho     5  (target mass, target mu_s, hand friction, ground mu, restitution)
//   previous action 3
constexpr int kEnvStateDim = 22;

inline Eigen::VectorXd build_env_state(const sim::SceneState& state, const Pose2& goal,
                                       const Eigen::Vector3d& prev_action, bool privileged,
                                       const sim::SimConfig& sim_cfg) {
  Eigen::VectorXd v(kEnvStateDim);
  const Pose2 ee = state.ee_pose(sim_cfg);
  v[0] = ee.p.x();
  v[1] = ee.p.y();
  v[2] = std::cos(ee.theta);
  v[3] = std::sin(ee.theta);
  v.segment<3>(4) = state.arm.q;
  v.segment<3>(7) = state.arm.qd;

  const sim::RigidBody& target = state.target();
  const Pose2 rel = target.pose.inverse().compose(goal);
  v[10] = rel.p.x();
  v[11] = rel.p.y();
  v[12] = std::cos(rel.theta);
  v[13] = std::sin(rel.theta);

  if (privileged) {
    v[14] = target.mass;
    v[15] = target.mu_s;
    v[16] = sim_cfg.ee_friction;
    v[17] = target.ground_mu;
    v[18] = target.restitution;
  } else {
    v.segment<5>(14).setZero();
  }
  v.segment<3>(19) = prev_action;
  return v;
}

/// Scene side of the observation: rendered cloud plus its patch tokens.
/// The dynamics tokens themselves come from the (frozen) encoder, evaluated
/// batched by the caller.
struct SceneObs {
  PhysPointCloud cloud;
  wm::TokenBatch tokens;
};

inline SceneObs build_scene_obs(const sim::SceneState& state, const sim::SceneCloudRenderer& renderer,
                                const wm::WMConfig& wm_cfg, const wm::ChannelMask& mask,
                                std::uint64_t tokenize_seed) {
  SceneObs out;
  out.cloud = renderer.render(state);
  if (mask.any()) out.cloud = wm::apply_channel_mask(out.cloud, mask);
  out.tokens = wm::tokenize(out.cloud, wm_cfg, tokenize_seed);
  return out;
}

}  // namespace pushdyn::rl
