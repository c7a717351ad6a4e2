#pragma once

#include <Eigen/Core>

namespace pushdyn::sim {

/// Stepper parameters. One control period (`dt`) is integrated as `substeps`
/// fixed physics substeps with sequential-impulse contact resolution.
struct SimConfig {
  double dt = 0.1;                  // control period, seconds
  int substeps = 5;                 // physics substeps per control period
  int velocity_iterations = 10;
  int position_iterations = 3;
  double contact_slop = 1e-3;       // allowed residual penetration, meters
  double position_beta = 0.7;       // positional correction factor
  double restitution_threshold = 0.05;  // m/s below which impacts are inelastic
  double gravity = 9.81;
  double workspace_half = 0.6;      // table is [-h, h]^2 centered at origin
  double action_bound = 0.1;        // max |dq| per control step, radians

  // impedance-style joint control: tau = kp (q_target - q) - kd qdot
  Eigen::Vector3d joint_kp = Eigen::Vector3d::Constant(50.0);
  Eigen::Vector3d joint_kd = Eigen::Vector3d::Constant(5.0);
  Eigen::Vector3d joint_inertia = Eigen::Vector3d(2.0, 1.0, 0.5);
  Eigen::Vector3d joint_limit = Eigen::Vector3d::Constant(2.8);

  Eigen::Vector2d arm_base = Eigen::Vector2d(-0.55, 0.0);
  double arm_base_theta = 0.0;

  double ee_friction = 0.5;         // dynamic friction of the pusher tip
  double ee_cloud_mass = 1.0;       // mass channel value for the rendered tip cloud
  double ground_rot_radius_coeff = 0.6;  // effective lever arm for spin friction, x bounding radius
  double stick_speed = 1e-3;        // below this tangential speed, static friction applies
};

/// Per-role point budgets for rendered scene clouds.
struct CloudBudgets {
  int target = 128;
  int obstacle = 128;
  int end_effector = 64;

  int total() const { return target + obstacle + end_effector; }
};

}  // namespace pushdyn::sim
