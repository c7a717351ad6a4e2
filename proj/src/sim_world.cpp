#include "pushdyn/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pushdyn::sim {

namespace {

struct ArmParticipant {
  Eigen::Vector2d ee_center;
  Eigen::Matrix3d j_world;        // world-frame end-effector Jacobian
  Eigen::Vector3d inv_inertia;    // 1 / joint inertia
};

// Contact point prepared for the velocity solver. `b` may be the arm tip.
struct SolverPoint {
  int a = 0;
  int b = 0;
  Eigen::Vector2d p, n, t;
  Eigen::Matrix<double, 2, 3> jc;  // arm contact Jacobian when b == kEndEffectorId
  double kn = 0.0, kt = 0.0;
  double bias = 0.0;
  double mu_d = 0.0, mu_s = 0.0;
  double jn = 0.0, jt = 0.0;
};

// Two-point manifolds get a coupled normal solve; sequential updates converge
// too slowly when both points share one face.
struct PointGroup {
  int first = 0;
  int count = 0;
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();  // Delassus matrix of the pair
  bool block = false;
};

Eigen::Vector2d point_velocity_of(const SceneState& s, const SolverPoint& cp, int which) {
  const int idx = which == 0 ? cp.a : cp.b;
  if (idx == kEndEffectorId) return cp.jc * s.arm.qd;
  return s.bodies[static_cast<std::size_t>(idx)].point_velocity(cp.p);
}

void apply_impulse(SceneState& s, const SolverPoint& cp, const Eigen::Vector2d& impulse_on_b,
                   const Eigen::Vector3d& inv_joint_inertia) {
  if (cp.b == kEndEffectorId) {
    s.arm.qd += inv_joint_inertia.asDiagonal() * (cp.jc.transpose() * impulse_on_b);
  } else {
    RigidBody& b = s.bodies[static_cast<std::size_t>(cp.b)];
    b.vel += impulse_on_b / b.mass;
    b.omega += cross2(cp.p - b.pose.p, impulse_on_b) / b.inertia;
  }
  RigidBody& a = s.bodies[static_cast<std::size_t>(cp.a)];
  a.vel -= impulse_on_b / a.mass;
  a.omega -= cross2(cp.p - a.pose.p, impulse_on_b) / a.inertia;
}

double inverse_mass_along(const SceneState& s, const SolverPoint& cp,
                          const ArmParticipant& arm_part, const Eigen::Vector3d& inv_ji,
                          const Eigen::Vector2d& dir) {
  const RigidBody& a = s.bodies[static_cast<std::size_t>(cp.a)];
  const double ra = cross2(cp.p - a.pose.p, dir);
  double k = 1.0 / a.mass + ra * ra / a.inertia;
  if (cp.b == kEndEffectorId) {
    const Eigen::Vector3d jtd = cp.jc.transpose() * dir;
    k += jtd.dot(inv_ji.asDiagonal() * jtd);
    (void)arm_part;
  } else {
    const RigidBody& b = s.bodies[static_cast<std::size_t>(cp.b)];
    const double rb = cross2(cp.p - b.pose.p, dir);
    k += 1.0 / b.mass + rb * rb / b.inertia;
  }
  return k;
}

// Change of normal velocity at point i per unit normal impulse at point j
// (shared normal, same body pair).
double normal_cross_term(const SceneState& s, const SolverPoint& pi, const SolverPoint& pj,
                         const Eigen::Vector3d& inv_ji) {
  const RigidBody& a = s.bodies[static_cast<std::size_t>(pi.a)];
  const double rai = cross2(pi.p - a.pose.p, pi.n);
  const double raj = cross2(pj.p - a.pose.p, pj.n);
  double k = 1.0 / a.mass + rai * raj / a.inertia;
  if (pi.b == kEndEffectorId) {
    const Eigen::Vector3d ji = pi.jc.transpose() * pi.n;
    const Eigen::Vector3d jj = pj.jc.transpose() * pj.n;
    k += ji.dot(inv_ji.asDiagonal() * jj);
  } else {
    const RigidBody& b = s.bodies[static_cast<std::size_t>(pi.b)];
    const double rbi = cross2(pi.p - b.pose.p, pi.n);
    const double rbj = cross2(pj.p - b.pose.p, pj.n);
    k += 1.0 / b.mass + rbi * rbj / b.inertia;
  }
  return k;
}

void solve_normal_point(SceneState& s, SolverPoint& cp, const Eigen::Vector3d& inv_ji) {
  const double vn = cp.n.dot(point_velocity_of(s, cp, 1) - point_velocity_of(s, cp, 0));
  double dl = -(vn - cp.bias) / cp.kn;
  const double jn0 = cp.jn;
  cp.jn = std::max(0.0, cp.jn + dl);
  dl = cp.jn - jn0;
  if (dl != 0.0) apply_impulse(s, cp, dl * cp.n, inv_ji);
}

// Coupled LCP solve of a two-point manifold (the four active-set cases),
// exact for an isolated face-face impact.
void solve_normal_block(SceneState& s, SolverPoint& p1, SolverPoint& p2,
                        const Eigen::Matrix2d& a, const Eigen::Vector3d& inv_ji) {
  const Eigen::Vector2d jn_acc(p1.jn, p2.jn);
  const Eigen::Vector2d vn(
      p1.n.dot(point_velocity_of(s, p1, 1) - point_velocity_of(s, p1, 0)),
      p2.n.dot(point_velocity_of(s, p2, 1) - point_velocity_of(s, p2, 0)));
  const Eigen::Vector2d bias(p1.bias, p2.bias);
  const Eigen::Vector2d d = vn - a * jn_acc - bias;

  Eigen::Vector2d x;
  for (;;) {
    x = -a.inverse() * d;
    if (x.x() >= 0.0 && x.y() >= 0.0) break;
    x = {-d.x() / a(0, 0), 0.0};
    if (x.x() >= 0.0 && a(1, 0) * x.x() + d.y() >= 0.0) break;
    x = {0.0, -d.y() / a(1, 1)};
    if (x.y() >= 0.0 && a(0, 1) * x.y() + d.x() >= 0.0) break;
    x.setZero();
    break;
  }
  const Eigen::Vector2d delta = x - jn_acc;
  if (delta.x() != 0.0) apply_impulse(s, p1, delta.x() * p1.n, inv_ji);
  if (delta.y() != 0.0) apply_impulse(s, p2, delta.y() * p2.n, inv_ji);
  p1.jn = x.x();
  p2.jn = x.y();
}

ArmParticipant make_arm_participant(const SceneState& s, const SimConfig& cfg) {
  ArmParticipant out;
  const Pose2 base{cfg.arm_base, cfg.arm_base_theta};
  const Pose2 ee_local = forward_kinematics(s.arm);
  out.ee_center = base.apply(ee_local.p);
  const Eigen::Matrix3d j = jacobian(s.arm);
  const Eigen::Rotation2Dd r(cfg.arm_base_theta);
  out.j_world = j;
  out.j_world.topRows<2>() = r.toRotationMatrix() * j.topRows<2>();
  out.inv_inertia = cfg.joint_inertia.cwiseInverse();
  return out;
}

Eigen::Matrix<double, 2, 3> contact_jacobian(const ArmParticipant& arm,
                                             const Eigen::Vector2d& point) {
  const Eigen::Vector2d r = point - arm.ee_center;
  Eigen::Matrix<double, 2, 3> jc;
  jc.row(0) = arm.j_world.row(0) - r.y() * arm.j_world.row(2);
  jc.row(1) = arm.j_world.row(1) + r.x() * arm.j_world.row(2);
  return jc;
}

std::vector<Manifold> detect_contacts(const SceneState& s, const SimConfig& cfg,
                                      const ArmParticipant& arm) {
  std::vector<Manifold> out;
  const int n = static_cast<int>(s.bodies.size());
  for (int i = 0; i < n; ++i) {
    const RigidBody& a = s.bodies[static_cast<std::size_t>(i)];
    if (a.dropped) continue;
    for (int j = i + 1; j < n; ++j) {
      const RigidBody& b = s.bodies[static_cast<std::size_t>(j)];
      if (b.dropped) continue;
      const double reach = a.shape.bounding_radius() + b.shape.bounding_radius() + cfg.contact_slop;
      if ((a.pose.p - b.pose.p).squaredNorm() > reach * reach) continue;
      Manifold m = collide_polygons(a, i, b, j, cfg.contact_slop);
      if (!m.points.empty()) out.push_back(std::move(m));
    }
  }
  for (int i = 0; i < n; ++i) {
    const RigidBody& a = s.bodies[static_cast<std::size_t>(i)];
    if (a.dropped) continue;
    const double reach = a.shape.bounding_radius() + s.arm.ee_radius + cfg.contact_slop;
    if ((a.pose.p - arm.ee_center).squaredNorm() > reach * reach) continue;
    Manifold m = collide_disc_polygon(arm.ee_center, s.arm.ee_radius, a, i, cfg.contact_slop);
    if (!m.points.empty()) out.push_back(std::move(m));
  }
  return out;
}

void apply_ground_friction(RigidBody& b, const SimConfig& cfg, double h) {
  const double dv = b.ground_mu * cfg.gravity * h;
  const double speed = b.vel.norm();
  if (speed <= dv)
    b.vel.setZero();
  else
    b.vel -= dv * b.vel / speed;

  const double lever = cfg.ground_rot_radius_coeff * b.shape.bounding_radius();
  const double domega = b.ground_mu * b.mass * cfg.gravity * lever / b.inertia * h;
  if (std::abs(b.omega) <= domega)
    b.omega = 0.0;
  else
    b.omega -= domega * (b.omega > 0 ? 1.0 : -1.0);
}

}  // namespace

const RigidBody& SceneState::target() const {
  const int t = target_index();
  if (t < 0) throw std::logic_error("scene has no target body");
  return bodies[static_cast<std::size_t>(t)];
}

void SceneState::validate(const SimConfig& cfg) const {
  for (const auto& b : bodies) b.validate();
  arm.validate(cfg.joint_limit);
  if (!std::isfinite(time)) throw std::invalid_argument("scene: non-finite time");
}

double SceneState::kinetic_energy(const SimConfig& cfg) const {
  double e = 0.0;
  for (const auto& b : bodies)
    if (!b.dropped) e += b.kinetic_energy();
  e += 0.5 * arm.qd.dot(cfg.joint_inertia.asDiagonal() * arm.qd);
  return e;
}

Pose2 SceneState::ee_pose(const SimConfig& cfg) const {
  const Pose2 base{cfg.arm_base, cfg.arm_base_theta};
  return base.compose(forward_kinematics(arm));
}

Eigen::Vector3d SceneState::ee_twist(const SimConfig& cfg) const {
  Eigen::Matrix3d j = jacobian(arm);
  j.topRows<2>() = Eigen::Rotation2Dd(cfg.arm_base_theta).toRotationMatrix() * j.topRows<2>();
  return j * arm.qd;
}

StepResult step(const SceneState& state, const Eigen::Vector3d& joint_target_delta,
                const SimConfig& cfg) {
  if (!joint_target_delta.allFinite())
    throw std::invalid_argument("step: non-finite joint target delta");
  if ((joint_target_delta.array().abs() > cfg.action_bound + 1e-9).any())
    throw std::invalid_argument("step: joint target delta exceeds the action bound");
  state.validate(cfg);

  StepResult result;
  SceneState& s = result.state;
  s = state;
  s.solver_warning = false;

  const double h = cfg.dt / cfg.substeps;
  const Eigen::Vector3d q_target =
      (s.arm.q + joint_target_delta).cwiseMax(-cfg.joint_limit).cwiseMin(cfg.joint_limit);

  for (int sub = 0; sub < cfg.substeps; ++sub) {
    // impedance-style joint control
    const Eigen::Vector3d tau =
        cfg.joint_kp.asDiagonal() * (q_target - s.arm.q) - cfg.joint_kd.asDiagonal() * s.arm.qd;
    s.arm.qd += h * cfg.joint_inertia.cwiseInverse().asDiagonal() * tau;

    for (auto& b : s.bodies)
      if (!b.dropped) apply_ground_friction(b, cfg, h);

    // integrate positions first; contacts are detected on the new poses so
    // fresh overlap is visible to the velocity solver in the same substep
    s.arm.q += h * s.arm.qd;
    for (int k = 0; k < 3; ++k) {
      if (s.arm.q[k] > cfg.joint_limit[k]) {
        s.arm.q[k] = cfg.joint_limit[k];
        s.arm.qd[k] = std::min(s.arm.qd[k], 0.0);
      } else if (s.arm.q[k] < -cfg.joint_limit[k]) {
        s.arm.q[k] = -cfg.joint_limit[k];
        s.arm.qd[k] = std::max(s.arm.qd[k], 0.0);
      }
    }
    for (auto& b : s.bodies) {
      if (b.dropped) continue;
      b.pose.p += h * b.vel;
      if (b.omega != 0.0) b.pose.theta = wrap_angle(b.pose.theta + h * b.omega);
    }

    const ArmParticipant arm = make_arm_participant(s, cfg);
    const auto manifolds = detect_contacts(s, cfg, arm);

    std::vector<SolverPoint> points;
    std::vector<PointGroup> groups;
    for (const auto& m : manifolds) {
      PointGroup group;
      group.first = static_cast<int>(points.size());
      group.count = static_cast<int>(m.points.size());
      for (const auto& mp : m.points) {
        SolverPoint cp;
        cp.a = m.a;
        cp.b = m.b;
        cp.p = mp.point;
        cp.n = m.normal;
        cp.t = perp(m.normal);
        if (cp.b == kEndEffectorId) cp.jc = contact_jacobian(arm, cp.p);
        cp.kn = inverse_mass_along(s, cp, arm, arm.inv_inertia, cp.n);
        cp.kt = inverse_mass_along(s, cp, arm, arm.inv_inertia, cp.t);
        const RigidBody& a = s.bodies[static_cast<std::size_t>(cp.a)];
        double mu_d_b = cfg.ee_friction, mu_s_b = cfg.ee_friction, e_b = 0.0;
        if (cp.b != kEndEffectorId) {
          const RigidBody& b = s.bodies[static_cast<std::size_t>(cp.b)];
          mu_d_b = b.mu_d;
          mu_s_b = b.mu_s;
          e_b = b.restitution;
        }
        cp.mu_d = std::sqrt(a.mu_d * mu_d_b);
        cp.mu_s = std::sqrt(a.mu_s * mu_s_b);
        const double e = std::max(a.restitution, e_b);
        const double vn0 =
            cp.n.dot(point_velocity_of(s, cp, 1) - point_velocity_of(s, cp, 0));
        cp.bias = vn0 < -cfg.restitution_threshold ? -e * vn0 : 0.0;
        points.push_back(cp);
      }
      if (group.count == 2) {
        const SolverPoint& p1 = points[static_cast<std::size_t>(group.first)];
        const SolverPoint& p2 = points[static_cast<std::size_t>(group.first) + 1];
        const double a12 = normal_cross_term(s, p1, p2, arm.inv_inertia);
        group.a << p1.kn, a12, a12, p2.kn;
        // only use the coupled solve when the pair is well conditioned
        group.block = group.a.determinant() > 1e-3 * p1.kn * p2.kn;
      }
      groups.push_back(group);
    }

    for (int it = 0; it < cfg.velocity_iterations; ++it) {
      for (const auto& g : groups) {
        if (g.block)
          solve_normal_block(s, points[static_cast<std::size_t>(g.first)],
                             points[static_cast<std::size_t>(g.first) + 1], g.a,
                             arm.inv_inertia);
        else
          for (int k = 0; k < g.count; ++k)
            solve_normal_point(s, points[static_cast<std::size_t>(g.first + k)],
                               arm.inv_inertia);
        for (int k = 0; k < g.count; ++k) {
          SolverPoint& cp = points[static_cast<std::size_t>(g.first + k)];
          const Eigen::Vector2d vrel =
              point_velocity_of(s, cp, 1) - point_velocity_of(s, cp, 0);
          const double vt = cp.t.dot(vrel);
          const double mu = std::abs(vt) < cfg.stick_speed ? cp.mu_s : cp.mu_d;
          double dlt = -vt / cp.kt;
          const double jt0 = cp.jt;
          cp.jt = std::clamp(cp.jt + dlt, -mu * cp.jn, mu * cp.jn);
          dlt = cp.jt - jt0;
          if (dlt != 0.0) apply_impulse(s, cp, dlt * cp.t, arm.inv_inertia);
        }
      }
    }

    // residual velocity violation -> diagnostic, never silent
    for (const auto& cp : points) {
      const double vn =
          cp.n.dot(point_velocity_of(s, cp, 1) - point_velocity_of(s, cp, 0));
      if (vn < cp.bias - 1e-3) s.solver_warning = true;
    }

    // positional correction (split from velocities: keeps momentum intact)
    for (int pit = 0; pit < cfg.position_iterations; ++pit) {
      const ArmParticipant arm_now = make_arm_participant(s, cfg);
      const auto cms = detect_contacts(s, cfg, arm_now);
      bool any = false;
      for (const auto& m : cms) {
        for (const auto& mp : m.points) {
          const double pen = mp.depth - cfg.contact_slop;
          if (pen <= 0.0) continue;
          any = true;
          const double corr = std::min(cfg.position_beta * pen, 0.05);
          RigidBody& a = s.bodies[static_cast<std::size_t>(m.a)];
          const double ra = cross2(mp.point - a.pose.p, m.normal);
          double k = 1.0 / a.mass + ra * ra / a.inertia;
          double inv_b_mass = 0.0, rb = 0.0;
          RigidBody* bb = nullptr;
          if (m.b != kEndEffectorId) {
            bb = &s.bodies[static_cast<std::size_t>(m.b)];
            rb = cross2(mp.point - bb->pose.p, m.normal);
            inv_b_mass = 1.0 / bb->mass;
            k += inv_b_mass + rb * rb / bb->inertia;
          }
          const double lambda = corr / k;
          a.pose.p -= lambda / a.mass * m.normal;
          a.pose.theta = wrap_angle(a.pose.theta - lambda * ra / a.inertia);
          if (bb) {
            bb->pose.p += lambda * inv_b_mass * m.normal;
            bb->pose.theta = wrap_angle(bb->pose.theta + lambda * rb / bb->inertia);
          }
        }
      }
      if (!any) break;
    }

    // impulses applied this substep become events
    const double t_now = s.time + (sub + 1) * h;
    for (const auto& cp : points) {
      if (cp.jn <= 0.0 && cp.jt == 0.0) continue;
      ContactEvent ev;
      ev.body_a = cp.a;
      ev.body_b = cp.b;
      ev.point = cp.p;
      ev.normal = cp.n;
      ev.normal_impulse = cp.jn;
      ev.tangent_impulse = cp.jt;
      ev.time = t_now;
      result.events.push_back(ev);
    }

    // off-table bodies are dropped and frozen
    for (auto& b : s.bodies) {
      if (b.dropped) continue;
      if (std::abs(b.pose.p.x()) > cfg.workspace_half ||
          std::abs(b.pose.p.y()) > cfg.workspace_half) {
        b.dropped = true;
        b.vel.setZero();
        b.omega = 0.0;
      }
    }
  }

  s.time = state.time + cfg.dt;
  s.step_index = state.step_index + 1;
  return result;
}

}  // namespace pushdyn::sim
