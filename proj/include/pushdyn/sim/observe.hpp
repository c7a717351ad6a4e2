#pragma once

#include <Eigen/Core>
#include <vector>

#include "pushdyn/cloud.hpp"
#include "pushdyn/rng.hpp"
#include "pushdyn/sampling.hpp"
#include "pushdyn/sim/config.hpp"
#include "pushdyn/sim/world.hpp"

namespace pushdyn::sim {

/// True iff the target body sits within both thresholds of the goal pose
/// (strict inequalities). `symmetry_order` > 1 evaluates the rotation error
/// modulo the body's k-fold symmetry.
inline bool check_success(const SceneState& state, const Pose2& goal, double tau_p, double tau_r,
                          int symmetry_order = 1) {
  const int t = state.target_index();
  if (t < 0) return false;
  const RigidBody& body = state.bodies[static_cast<std::size_t>(t)];
  if (body.dropped) return false;
  const double dp = (body.pose.p - goal.p).norm();
  const double dr = symmetric_angle_distance(body.pose.theta, goal.theta, symmetry_order);
  return dp < tau_p && dr < tau_r;
}

/// Surface distance between the pusher tip disc and the target polygon.
inline double ee_target_distance(const SceneState& state, const SimConfig& cfg) {
  const RigidBody& target = state.target();
  const Pose2 ee = state.ee_pose(cfg);
  const Eigen::Vector2d local = target.pose.inverse().apply(ee.p);
  return std::max(0.0, target.shape.distance(local) - state.arm.ee_radius);
}

/// Identifies where a rendered point came from: a body's canonical point
/// (body >= 0), the end-effector disc (kSourceEndEffector), or boundary
/// padding (kSourcePad).
struct PointSource {
  std::int32_t body = 0;
  std::uint32_t canon = 0;
};
constexpr std::int32_t kSourceEndEffector = -1;
constexpr std::int32_t kSourcePad = -2;

/// Renders SceneStates of one scene into physical point clouds with fixed
/// per-role budgets. Canonical per-body point sets are sampled once at
/// construction (seeded), so point identity is stable across frames.
class SceneCloudRenderer {
 public:
  SceneCloudRenderer(const SceneState& scene, const CloudBudgets& budgets, const SimConfig& cfg,
                     std::uint64_t seed)
      : budgets_(budgets), cfg_(cfg) {
    for (std::size_t i = 0; i < scene.bodies.size(); ++i) {
      const RigidBody& b = scene.bodies[i];
      const int count = b.role == BodyRole::Target ? budgets.target : budgets.obstacle;
      canonical_.push_back(
          sample_body_points(b.shape, count, b.mass, derive_seed(seed, 0x70c5u, i)));
    }
    // unit disc, rescaled by the actual tip radius at render time
    ee_unit_ = sample_body_points(ConvexPolygon::make_regular(16, 1.0), budgets.end_effector,
                                  cfg.ee_cloud_mass, derive_seed(seed, 0xee00u));
  }

  PhysPointCloud render(const SceneState& state, std::vector<PointSource>* sources = nullptr) const {
    PhysPointCloud target_cloud, obstacle_cloud;
    std::vector<PointSource> target_src, obstacle_src;
    for (std::size_t i = 0; i < state.bodies.size(); ++i) {
      const RigidBody& b = state.bodies[i];
      if (b.role == BodyRole::Target) {
        target_cloud = transform_body(canonical_[i], b);
        for (auto& l : target_cloud.labels) l = PointLabel::Target;
        for (int p = 0; p < target_cloud.size(); ++p)
          target_src.push_back({static_cast<std::int32_t>(i), static_cast<std::uint32_t>(p)});
      } else if (!b.dropped) {
        PhysPointCloud c = transform_body(canonical_[i], b);
        for (auto& l : c.labels) l = PointLabel::Obstacle;
        for (int p = 0; p < c.size(); ++p)
          obstacle_src.push_back({static_cast<std::int32_t>(i), static_cast<std::uint32_t>(p)});
        if (obstacle_cloud.size() == 0)
          obstacle_cloud = std::move(c);
        else
          obstacle_cloud.append(c);
      }
    }

    const RigidBody& target = state.target();
    const Eigen::Vector3d focus(target.pose.p.x(), target.pose.p.y(), 0.0);
    PhysPointCloud cropped;
    std::vector<PointSource> cropped_src;
    if (obstacle_cloud.size() > 0) {
      const auto keep = crop_scene_indices(obstacle_cloud, focus, budgets_.obstacle);
      cropped = obstacle_cloud.subset(keep);
      for (int idx : keep) cropped_src.push_back(obstacle_src[static_cast<std::size_t>(idx)]);
    }
    const int pad_count = budgets_.obstacle - cropped.size();
    pad_obstacles(cropped);
    for (int p = 0; p < pad_count; ++p) cropped_src.push_back({kSourcePad, static_cast<std::uint32_t>(p)});

    PhysPointCloud out = std::move(target_cloud);
    out.append(cropped);
    out.append(render_ee(state));
    if (sources) {
      sources->clear();
      sources->insert(sources->end(), target_src.begin(), target_src.end());
      sources->insert(sources->end(), cropped_src.begin(), cropped_src.end());
      for (int p = 0; p < budgets_.end_effector; ++p)
        sources->push_back({kSourceEndEffector, static_cast<std::uint32_t>(p)});
    }
    return out;
  }

  /// Canonical (local-frame) point set for a body, as sampled at construction.
  const PhysPointCloud& canonical(int body) const {
    return canonical_[static_cast<std::size_t>(body)];
  }
  const PhysPointCloud& ee_unit() const { return ee_unit_; }

  const CloudBudgets& budgets() const { return budgets_; }

 private:
  static PhysPointCloud transform_body(const PhysPointCloud& canonical, const RigidBody& b) {
    PhysPointCloud out = canonical;
    for (int i = 0; i < out.size(); ++i) {
      const Eigen::Vector2d local(canonical.positions()(i, 0), canonical.positions()(i, 1));
      const Eigen::Vector2d w = b.pose.apply(local);
      const Eigen::Vector2d v = b.point_velocity(w);
      out.positions().row(i) << w.x(), w.y(), 0.0;
      out.velocities().row(i) << v.x(), v.y(), 0.0;
    }
    return out;
  }

  PhysPointCloud render_ee(const SceneState& state) const {
    const Pose2 ee = state.ee_pose(cfg_);
    const Eigen::Vector3d twist = state.ee_twist(cfg_);
    PhysPointCloud out = ee_unit_;
    for (int i = 0; i < out.size(); ++i) {
      const Eigen::Vector2d local(ee_unit_.positions()(i, 0), ee_unit_.positions()(i, 1));
      const Eigen::Vector2d w = ee.apply(state.arm.ee_radius * local);
      const Eigen::Vector2d v = twist.head<2>() + twist[2] * perp(w - ee.p);
      out.positions().row(i) << w.x(), w.y(), 0.0;
      out.velocities().row(i) << v.x(), v.y(), 0.0;
      out.labels[static_cast<std::size_t>(i)] = PointLabel::EndEffector;
    }
    return out;
  }

  // Deficit slots are filled with massless, motionless sentinels along the
  // workspace boundary so the cloud layout stays fixed even with no obstacles.
  void pad_obstacles(PhysPointCloud& cloud) const {
    const int missing = budgets_.obstacle - cloud.size();
    if (missing <= 0) return;
    PhysPointCloud pad(missing);
    const double h = cfg_.workspace_half;
    for (int i = 0; i < missing; ++i) {
      const double t = (i + 0.5) / missing * 4.0;
      const int side = static_cast<int>(t);
      const double u = (t - side) * 2.0 * h - h;
      Eigen::Vector2d p;
      switch (side) {
        case 0: p = {u, -h}; break;
        case 1: p = {h, u}; break;
        case 2: p = {-u, h}; break;
        default: p = {-h, -u}; break;
      }
      pad.positions().row(i) << p.x(), p.y(), 0.0;
      pad.labels[static_cast<std::size_t>(i)] = PointLabel::Obstacle;
    }
    if (cloud.size() == 0)
      cloud = std::move(pad);
    else
      cloud.append(pad);
  }

  CloudBudgets budgets_;
  SimConfig cfg_;
  std::vector<PhysPointCloud> canonical_;
  PhysPointCloud ee_unit_;
};

/// One-shot convenience wrapper over SceneCloudRenderer.
inline PhysPointCloud render_scene_cloud(const SceneState& state, const CloudBudgets& budgets,
                                         const SimConfig& cfg, std::uint64_t seed) {
  return SceneCloudRenderer(state, budgets, cfg, seed).render(state);
}

}  // namespace pushdyn::sim
