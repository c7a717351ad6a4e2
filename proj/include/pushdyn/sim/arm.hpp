#pragma once

#include <Eigen/Core>
#include <array>
#include <stdexcept>

#include "pushdyn/se2.hpp"

namespace pushdyn::sim {

/// 3-DoF planar revolute chain with a disc pusher at the tip.
/// Poses returned by the kinematics are expressed in the arm base frame.
struct ArmState {
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  Eigen::Vector3d qd = Eigen::Vector3d::Zero();
  Eigen::Vector3d link_lengths = Eigen::Vector3d(0.35, 0.30, 0.25);
  double ee_radius = 0.03;

  void validate(const Eigen::Vector3d& joint_limit) const {
    if ((link_lengths.array() <= 0.0).any())
      throw std::invalid_argument("arm: link lengths must be positive");
    if (!(ee_radius > 0.0)) throw std::invalid_argument("arm: tip radius must be positive");
    if (!q.allFinite() || !qd.allFinite()) throw std::invalid_argument("arm: non-finite state");
    if ((q.array().abs() > joint_limit.array() + 1e-9).any())
      throw std::invalid_argument("arm: joint position outside limits");
  }

  double reach() const { return link_lengths.sum(); }
};

inline Pose2 forward_kinematics(const ArmState& arm) {
  double a = 0.0;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  for (int i = 0; i < 3; ++i) {
    a += arm.q[i];
    p += arm.link_lengths[i] * Eigen::Vector2d(std::cos(a), std::sin(a));
  }
  return {p, wrap_angle(a)};
}

/// Joint positions (pivots) of the chain in the base frame; index 0 is the base.
inline std::array<Eigen::Vector2d, 3> joint_positions(const ArmState& arm) {
  std::array<Eigen::Vector2d, 3> out;
  double a = 0.0;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  for (int i = 0; i < 3; ++i) {
    out[static_cast<std::size_t>(i)] = p;
    a += arm.q[i];
    p += arm.link_lengths[i] * Eigen::Vector2d(std::cos(a), std::sin(a));
  }
  return out;
}

/// Analytic Jacobian d(x, y, theta)/dq of the end-effector pose.
/// Row structure: each revolute joint contributes perp(p_ee - p_joint) to the
/// translational part and exactly 1 to the orientation row.
inline Eigen::Matrix3d jacobian(const ArmState& arm) {
  const Pose2 ee = forward_kinematics(arm);
  const auto joints = joint_positions(arm);
  Eigen::Matrix3d j;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2d r = perp(ee.p - joints[static_cast<std::size_t>(i)]);
    j(0, i) = r.x();
    j(1, i) = r.y();
    j(2, i) = 1.0;
  }
  return j;
}

}  // namespace pushdyn::sim
