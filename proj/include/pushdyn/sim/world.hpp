#pragma once

#include <Eigen/Core>
#include <vector>

#include "pushdyn/sim/arm.hpp"
#include "pushdyn/sim/body.hpp"
#include "pushdyn/sim/config.hpp"
#include "pushdyn/sim/contact.hpp"

namespace pushdyn::sim {

/// Ground-truth episode state: all rigid bodies plus the pusher arm.
struct SceneState {
  std::vector<RigidBody> bodies;
  ArmState arm;
  double time = 0.0;
  int step_index = 0;
  bool solver_warning = false;  // set when the impulse solver left residual violation

  int target_index() const {
    for (std::size_t i = 0; i < bodies.size(); ++i)
      if (bodies[i].role == BodyRole::Target) return static_cast<int>(i);
    return -1;
  }

  const RigidBody& target() const;

  void validate(const SimConfig& cfg) const;

  double kinetic_energy(const SimConfig& cfg) const;

  /// End-effector pose in the world frame.
  Pose2 ee_pose(const SimConfig& cfg) const;

  /// End-effector twist (vx, vy, omega) in the world frame.
  Eigen::Vector3d ee_twist(const SimConfig& cfg) const;
};

struct StepResult {
  SceneState state;
  std::vector<ContactEvent> events;
};

/// Advances one control period: the joint target q + dq is tracked by a PD
/// law while bodies obey Coulomb ground friction and sequential-impulse
/// contact resolution. Deterministic for identical inputs.
StepResult step(const SceneState& state, const Eigen::Vector3d& joint_target_delta,
                const SimConfig& cfg);

}  // namespace pushdyn::sim
