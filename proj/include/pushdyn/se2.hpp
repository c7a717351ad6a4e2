#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace pushdyn {

// Wraps an angle to (-pi, pi] using the atan2 convention.
inline double wrap_angle(double a) {
  return std::atan2(std::sin(a), std::cos(a));
}

// Planar rigid transform (x, y, theta).
struct Pose2 {
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  double theta = 0.0;

  static Pose2 identity() { return {}; }

  Eigen::Rotation2Dd rot() const { return Eigen::Rotation2Dd(theta); }

  Eigen::Vector2d apply(const Eigen::Vector2d& x) const { return rot() * x + p; }

  Pose2 compose(const Pose2& o) const {
    return {rot() * o.p + p, wrap_angle(theta + o.theta)};
  }

  Pose2 inverse() const {
    Eigen::Rotation2Dd ri(-theta);
    return {-(ri * p), wrap_angle(-theta)};
  }
};

inline double planar_distance(const Pose2& a, const Pose2& b) {
  return (a.p - b.p).norm();
}

inline double angle_distance(const Pose2& a, const Pose2& b) {
  return std::abs(wrap_angle(a.theta - b.theta));
}

// Rotation error modulo a k-fold symmetry: the smallest wrapped error over
// all equivalent orientations 2*pi*j/k.
inline double symmetric_angle_distance(double theta_a, double theta_b, int symmetry_order) {
  if (symmetry_order <= 1) return std::abs(wrap_angle(theta_a - theta_b));
  const double period = 2.0 * M_PI / static_cast<double>(symmetry_order);
  double d = std::fmod(theta_a - theta_b, period);
  if (d < 0) d += period;
  return std::min(d, period - d);
}

inline Eigen::Vector2d perp(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace pushdyn
