#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "pushdyn/se2.hpp"

namespace pushdyn::deploy {

/// Constant-velocity EKF over SE(2): state (x, y, theta, vx, vy, omega),
/// pose-only measurements with wrapped angle innovation. The covariance is
/// kept symmetric positive-definite via the Joseph-form update plus an
/// eigenvalue floor.
struct EkfState {
  Eigen::Matrix<double, 6, 1> x = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 6> covariance = Eigen::Matrix<double, 6, 6>::Identity() * 1e-2;
  Eigen::Matrix<double, 6, 6> process_noise;
  Eigen::Matrix3d measurement_noise;
  bool floored = false;  // diagnostic: covariance needed re-flooring

  EkfState() {
    process_noise.setZero();
    process_noise.diagonal() << 1e-4, 1e-4, 1e-4, 1e-2, 1e-2, 1e-2;
    measurement_noise = Eigen::Matrix3d::Identity() * 2.5e-5;
  }

  static EkfState from_pose(const Pose2& pose) {
    EkfState s;
    s.x.head<3>() << pose.p.x(), pose.p.y(), pose.theta;
    return s;
  }

  Pose2 pose() const { return {{x[0], x[1]}, x[2]}; }
  Eigen::Vector3d velocity() const { return x.tail<3>(); }
};

inline EkfState ekf_update(EkfState s, const Pose2& measured, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("ekf_update: dt must be positive");

  // predict under constant velocity
  Eigen::Matrix<double, 6, 6> f = Eigen::Matrix<double, 6, 6>::Identity();
  f(0, 3) = f(1, 4) = f(2, 5) = dt;
  s.x = f * s.x;
  s.x[2] = wrap_angle(s.x[2]);
  s.covariance = f * s.covariance * f.transpose() + s.process_noise;

  // pose measurement
  Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
  h(0, 0) = h(1, 1) = h(2, 2) = 1.0;
  Eigen::Vector3d innovation(measured.p.x() - s.x[0], measured.p.y() - s.x[1],
                             wrap_angle(measured.theta - s.x[2]));
  const Eigen::Matrix3d cov_inn = h * s.covariance * h.transpose() + s.measurement_noise;
  const Eigen::Matrix<double, 6, 3> gain = s.covariance * h.transpose() * cov_inn.inverse();
  s.x += gain * innovation;
  s.x[2] = wrap_angle(s.x[2]);

  const Eigen::Matrix<double, 6, 6> ikh = Eigen::Matrix<double, 6, 6>::Identity() - gain * h;
  s.covariance = ikh * s.covariance * ikh.transpose() +
                 gain * s.measurement_noise * gain.transpose();
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(s.covariance);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < 1e-12) {
    s.covariance += (1e-12 - min_eig) * Eigen::Matrix<double, 6, 6>::Identity();
    s.floored = true;
  }
  return s;
}

}  // namespace pushdyn::deploy
