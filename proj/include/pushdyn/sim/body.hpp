#pragma once

#include <Eigen/Core>
#include <stdexcept>

#include "pushdyn/polygon.hpp"
#include "pushdyn/se2.hpp"

namespace pushdyn::sim {

enum class BodyRole : int { Target = 0, Obstacle = 1 };

/// Planar rigid body with a convex polygon collider (local frame, centroid at
/// the origin) and Coulomb friction both against peers and against the table.
struct RigidBody {
  ConvexPolygon shape;
  double height = 0.05;  // extruded height, visual only

  Pose2 pose;
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();
  double omega = 0.0;

  double mass = 1.0;
  double inertia = 1.0;   // about the centroid, kg m^2
  double mu_s = 0.6;      // static friction
  double mu_d = 0.5;      // dynamic friction, <= mu_s
  double restitution = 0.1;
  double ground_mu = 0.4;

  BodyRole role = BodyRole::Obstacle;
  int symmetry_order = 1;
  bool dropped = false;

  void validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("body: mass must be positive");
    if (!(inertia > 0.0)) throw std::invalid_argument("body: inertia must be positive");
    if (mu_d > mu_s + 1e-12) throw std::invalid_argument("body: dynamic friction exceeds static");
    if (restitution < 0.0 || restitution > 1.0)
      throw std::invalid_argument("body: restitution outside [0, 1]");
    if (!pose.p.allFinite() || !std::isfinite(pose.theta) || !vel.allFinite() ||
        !std::isfinite(omega))
      throw std::invalid_argument("body: non-finite state");
  }

  /// Builds a body with inertia from the uniform-density polygon.
  static RigidBody make(ConvexPolygon poly, double mass_kg, BodyRole role) {
    RigidBody b;
    b.shape = poly.canonicalized();
    b.mass = mass_kg;
    b.inertia = mass_kg * b.shape.inertia_per_mass();
    b.role = role;
    b.symmetry_order = b.shape.symmetry_order();
    return b;
  }

  Eigen::Vector2d world_vertex(int i) const { return pose.apply(shape.vertex(i)); }

  /// Velocity of the material point at world position `p`.
  Eigen::Vector2d point_velocity(const Eigen::Vector2d& p) const {
    return vel + omega * perp(p - pose.p);
  }

  double kinetic_energy() const {
    return 0.5 * mass * vel.squaredNorm() + 0.5 * inertia * omega * omega;
  }
};

}  // namespace pushdyn::sim
