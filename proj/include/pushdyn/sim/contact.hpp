#pragma once

#include <Eigen/Core>
#include <array>
#include <limits>
#include <vector>

#include "pushdyn/se2.hpp"
#include "pushdyn/sim/body.hpp"

namespace pushdyn::sim {

/// Resolved contact impulse record. body_b == kEndEffectorId means the pusher
/// tip was the second participant. Normal points from body_a toward body_b.
struct ContactEvent {
  int body_a = -1;
  int body_b = -1;
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();
  double normal_impulse = 0.0;
  double tangent_impulse = 0.0;
  double time = 0.0;
};

constexpr int kEndEffectorId = -1;

struct ContactPoint {
  Eigen::Vector2d point;
  double depth = 0.0;  // positive when penetrating
};

struct Manifold {
  int a = 0;
  int b = 0;                      // kEndEffectorId for the pusher
  Eigen::Vector2d normal;         // from a to b, unit
  std::vector<ContactPoint> points;
};

namespace detail {

struct Separation {
  double value = -std::numeric_limits<double>::infinity();
  int face = -1;
};

// Deepest separation of B's vertices against A's face planes (world frame).
inline Separation max_separation(const RigidBody& a, const RigidBody& b) {
  Separation best;
  best.value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < a.shape.count(); ++i) {
    const Eigen::Vector2d p0 = a.world_vertex(i);
    const Eigen::Vector2d edge = a.world_vertex(i + 1) - p0;
    const Eigen::Vector2d n = -perp(edge).normalized();  // outward for CCW
    double sep = std::numeric_limits<double>::infinity();
    for (int j = 0; j < b.shape.count(); ++j)
      sep = std::min(sep, n.dot(b.world_vertex(j) - p0));
    if (sep > best.value) {
      best.value = sep;
      best.face = i;
    }
  }
  return best;
}

struct ClipVertex {
  Eigen::Vector2d v;
};

inline int clip_segment(const std::array<ClipVertex, 2>& in, std::array<ClipVertex, 2>& out,
                        const Eigen::Vector2d& n, double offset) {
  int count = 0;
  const double d0 = n.dot(in[0].v) - offset;
  const double d1 = n.dot(in[1].v) - offset;
  if (d0 <= 0.0) out[static_cast<std::size_t>(count++)] = in[0];
  if (d1 <= 0.0) out[static_cast<std::size_t>(count++)] = in[1];
  if (d0 * d1 < 0.0 && count < 2) {
    const double t = d0 / (d0 - d1);
    out[static_cast<std::size_t>(count++)].v = in[0].v + t * (in[1].v - in[0].v);
  }
  return count;
}

}  // namespace detail

/// Face-clipping manifold between two convex polygons, up to two points.
/// Returns an empty manifold when separated by more than `slop`.
inline Manifold collide_polygons(const RigidBody& a, int ia, const RigidBody& b, int ib,
                                 double slop) {
  Manifold m;
  m.a = ia;
  m.b = ib;

  const auto sep_a = detail::max_separation(a, b);
  if (sep_a.value > slop) return m;
  const auto sep_b = detail::max_separation(b, a);
  if (sep_b.value > slop) return m;

  // reference polygon owns the least-penetration axis; small bias keeps the
  // choice stable between nearly equal separations
  const bool ref_is_a = sep_a.value + 1e-10 >= sep_b.value;
  const RigidBody& ref = ref_is_a ? a : b;
  const RigidBody& inc = ref_is_a ? b : a;
  const int ref_face = ref_is_a ? sep_a.face : sep_b.face;

  const Eigen::Vector2d rv0 = ref.world_vertex(ref_face);
  const Eigen::Vector2d rv1 = ref.world_vertex(ref_face + 1);
  const Eigen::Vector2d ref_edge = (rv1 - rv0).normalized();
  const Eigen::Vector2d ref_normal = -perp(ref_edge);  // outward

  // incident face: the one least aligned with the reference normal
  int inc_face = 0;
  double best_dot = std::numeric_limits<double>::infinity();
  for (int i = 0; i < inc.shape.count(); ++i) {
    const Eigen::Vector2d e = inc.world_vertex(i + 1) - inc.world_vertex(i);
    const Eigen::Vector2d n = -perp(e).normalized();
    const double d = n.dot(ref_normal);
    if (d < best_dot) {
      best_dot = d;
      inc_face = i;
    }
  }

  std::array<detail::ClipVertex, 2> incident{{{inc.world_vertex(inc_face)},
                                              {inc.world_vertex(inc_face + 1)}}};
  std::array<detail::ClipVertex, 2> clipped1, clipped2;
  // clip against the two side planes of the reference face
  if (detail::clip_segment(incident, clipped1, -ref_edge, -ref_edge.dot(rv0)) < 2) return m;
  if (detail::clip_segment(clipped1, clipped2, ref_edge, ref_edge.dot(rv1)) < 2) return m;

  for (const auto& cv : clipped2) {
    const double sep = ref_normal.dot(cv.v - rv0);
    if (sep <= slop) {
      ContactPoint cp;
      cp.point = cv.v;
      cp.depth = -sep;
      m.points.push_back(cp);
    }
  }
  if (m.points.empty()) return m;

  // manifold normal always points from a to b
  m.normal = ref_is_a ? ref_normal : Eigen::Vector2d(-ref_normal);
  return m;
}

/// Disc (pusher tip) against polygon. Normal points from the body toward the
/// disc center.
inline Manifold collide_disc_polygon(const Eigen::Vector2d& center, double radius,
                                     const RigidBody& body, int body_index, double slop) {
  Manifold m;
  m.a = body_index;
  m.b = kEndEffectorId;

  if (body.shape.contains(body.pose.inverse().apply(center))) {
    // deep case: center inside; push out along the least-penetration face
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Vector2d n = Eigen::Vector2d::UnitX();
    Eigen::Vector2d fp = center;
    for (int i = 0; i < body.shape.count(); ++i) {
      const Eigen::Vector2d p0 = body.world_vertex(i);
      const Eigen::Vector2d nn = -perp(body.world_vertex(i + 1) - p0).normalized();
      const double d = nn.dot(center - p0);  // negative inside
      if (d > best) {
        best = d;
        n = nn;
        fp = center - d * nn;
      }
    }
    ContactPoint cp;
    cp.point = fp;
    cp.depth = radius - best;
    m.points.push_back(cp);
    m.normal = n;
    return m;
  }

  const Eigen::Vector2d local = body.pose.inverse().apply(center);
  const Eigen::Vector2d closest = body.pose.apply(body.shape.closest_point(local));
  const Eigen::Vector2d d = center - closest;
  const double dist = d.norm();
  if (dist > radius + slop || dist < 1e-12) return m;
  ContactPoint cp;
  cp.point = closest;
  cp.depth = radius - dist;
  m.points.push_back(cp);
  m.normal = d / dist;
  return m;
}

}  // namespace pushdyn::sim
