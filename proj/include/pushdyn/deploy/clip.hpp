#pragma once

#include <Eigen/Dense>

#include "pushdyn/sim/arm.hpp"

namespace pushdyn::deploy {

/// Cartesian-space action clipping via a damped pseudo-inverse.
struct ClipConfig {
  double eps_x = 0.02;  // per-step Cartesian bound on ||J dq||
  double lambda = 0.1;  // damping

  void validate() const {
    if (!(eps_x > 0)) throw std::invalid_argument("clip config: eps_x must be positive");
    if (lambda < 0) throw std::invalid_argument("clip config: lambda must be nonnegative");
  }
};

struct ClipResult {
  Eigen::Vector3d dq;
  bool clipped = false;
  bool damping_fallback = false;  // singular J J^T at lambda = 0
};

/// If ||J dq|| exceeds the bound, the excess Cartesian motion is mapped back
/// through J^T (J J^T + lambda^2 I)^-1 and subtracted from the joint command.
inline ClipResult clip_action_detailed(const Eigen::Vector3d& dq, const sim::ArmState& arm,
                                       const ClipConfig& cfg) {
  cfg.validate();
  ClipResult out{dq, false, false};
  const Eigen::Matrix3d j = sim::jacobian(arm);
  const Eigen::Vector3d dx = j * dq;
  const double norm = dx.norm();
  if (norm <= cfg.eps_x) return out;

  const Eigen::Vector3d dx_excess = dx * (1.0 - cfg.eps_x / norm);
  double lambda = cfg.lambda;
  Eigen::Matrix3d a = j * j.transpose() + lambda * lambda * Eigen::Matrix3d::Identity();
  Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
  if (!lu.isInvertible()) {
    lambda = 1e-3;
    a = j * j.transpose() + lambda * lambda * Eigen::Matrix3d::Identity();
    lu.compute(a);
    out.damping_fallback = true;
  }
  const Eigen::Vector3d dq_excess = j.transpose() * lu.solve(dx_excess);
  out.dq = dq - dq_excess;
  out.clipped = true;
  return out;
}

inline Eigen::Vector3d clip_action(const Eigen::Vector3d& dq, const sim::ArmState& arm,
                                   const ClipConfig& cfg) {
  return clip_action_detailed(dq, arm, cfg).dq;
}

}  // namespace pushdyn::deploy
