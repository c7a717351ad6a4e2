// Acceptance suite: every criterion runs at its stated tolerance and prints
// one [PASS]/[FAIL] line. Run everything, or a single criterion with
// `--only <name>`; `--list` enumerates names.

#include <chrono>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <thread>

#include "pushdyn/binio.hpp"
#include "pushdyn/chamfer.hpp"
#include "pushdyn/cur/curriculum.hpp"
#include "pushdyn/deploy/clip.hpp"
#include "pushdyn/deploy/distill.hpp"
#include "pushdyn/deploy/ekf.hpp"
#include "pushdyn/io/runconfig.hpp"
#include "pushdyn/rl/eval.hpp"

#ifndef PUSHDYN_CLI_PATH
#define PUSHDYN_CLI_PATH "pushdyn"
#endif

using namespace pushdyn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  std::string name;
  std::function<Outcome()> fn;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("pushdyn_accept_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

// ---------------------------------------------------------------------------
// 1. formula fidelity
// ---------------------------------------------------------------------------

Outcome check_formula_fidelity() {
  using namespace pushdyn::rl;
  Outcome out;
  RewardConfig cfg;

  if (contact_reward(0.0, cfg.sigma_contact) != 1.0)
    return {false, "r_contact(0) != 1"};
  const double expect = 1.0 - std::tanh(1.0);
  if (std::abs(contact_reward(cfg.sigma_contact, cfg.sigma_contact) - expect) > 1e-6)
    return {false, "r_contact(sigma) off: " + fmt(contact_reward(0.1, 0.1))};
  if (std::abs(expect - 0.238406) > 1e-6)
    return {false, "tanh identity drifted"};

  // gate zeroing at and beyond the threshold
  for (double d_ee : {0.1, 0.15, 1.0}) {
    if (gate_open(d_ee, cfg.d_th)) return {false, "gate open at d_ee=" + fmt(d_ee)};
    if (goal_reward(gate_open(d_ee, cfg.d_th), 0.01, cfg.sigma_coarse) != 0.0)
      return {false, "goal reward leaked through a closed gate"};
  }

  if (success_scale(1.0) != 0.5 || success_scale(0.0) != 1.0)
    return {false, "success scale bounds wrong"};

  if (cfg.w_contact != 1.0 || cfg.w_goal != 5.0 || cfg.w_goal_fine != 16.0 ||
      cfg.w_success != 2000.0)
    return {false, "reward weights are not {1, 5, 16, 2000}"};

  // full-stack weighted-sum identity on a constructed scene
  sim::SimConfig sim_cfg;
  sim::SceneState s;
  auto target = sim::RigidBody::make(ConvexPolygon::make_box(0.05, 0.04), 0.2, sim::BodyRole::Target);
  target.pose.p = {0.38, 0.0};
  s.bodies.push_back(target);
  auto obs = sim::RigidBody::make(ConvexPolygon::make_regular(6, 0.06), 0.8, sim::BodyRole::Obstacle);
  obs.pose.p = {-0.2, 0.3};
  s.bodies.push_back(obs);
  sim::SceneState start = s;
  s.bodies[1].pose.p += Eigen::Vector2d(0.05, 0.0);  // some obstacle motion
  auto rb = compute_reward(s, start, Pose2{{0.5, 0.1}, 0.4}, cfg, sim_cfg);
  const double total = cfg.w_contact * rb.r_contact + cfg.w_goal * rb.r_goal +
                       cfg.w_goal_fine * rb.r_goal_fine + cfg.w_success * rb.r_success;
  if (rb.total != total) return {false, "total != weighted sum"};

  // combined pose error convention
  if (std::abs(combined_pose_error(0.1, 0.5, cfg.rot_scale) - 0.2) > 1e-12)
    return {false, "combined pose error d_p + d_r/5 broken"};

  out.pass = true;
  out.detail = "r_contact(sigma)=" + fmt(contact_reward(0.1, 0.1)) + ", weights {1,5,16,2000}";
  return out;
}

// ---------------------------------------------------------------------------
// 2. world-model gradient check (64-bit, tiny config, full sweep)
// ---------------------------------------------------------------------------

PhysPointCloud role_cloud(int nt, int no, int ne, Pcg32& rng, double vel_scale) {
  PhysPointCloud c(nt + no + ne);
  for (int i = 0; i < c.size(); ++i) {
    c.positions().row(i) << rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), 0.0;
    c.masses()[i] = rng.uniform(0.01, 0.5);
    c.velocities().row(i) << vel_scale * rng.normal(), vel_scale * rng.normal(), 0.0;
    c.labels[static_cast<std::size_t>(i)] =
        i < nt ? PointLabel::Target : (i < nt + no ? PointLabel::Obstacle : PointLabel::EndEffector);
  }
  return c;
}

Outcome check_wm_gradcheck() {
  wm::WMConfig cfg;
  cfg.patches_target = 2;
  cfg.patches_obstacle = 1;
  cfg.patches_ee = 1;  // P = 4
  cfg.k = 4;
  cfg.dim = 8;
  cfg.blocks = 1;
  cfg.heads = 2;
  auto model = wm::WorldModel<double>::init(cfg, 12);
  model.stats.count = 1;
  model.stats.mean.setZero();
  model.stats.m2.setOnes();

  Pcg32 rng(43);
  PhysPointCloud cloud = role_cloud(16, 10, 6, rng, 0.2);  // N = 32
  wm::TokenBatch tb = wm::tokenize(cloud, cfg, 5);
  std::vector<const wm::TokenBatch*> batch{&tb};
  Eigen::Matrix<double, Eigen::Dynamic, 3> act(1, 3);
  act << 0.02, -0.01, 0.03;

  const int n = cloud.size();
  Eigen::MatrixX3d tpos(n, 3), tvel(n, 3);
  for (int i = 0; i < n; ++i) {
    tpos.row(i) << rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0;
    tvel.row(i) << 0.1 * rng.normal(), 0.1 * rng.normal(), 0.0;
  }

  auto eval = [&]() {
    ad::Tape<double> t;
    auto dec = model.decode(t, model.encode(t, batch), batch, act);
    auto loss = model.loss(t, dec, model.normalize_targets_pos({tpos}),
                           model.normalize_targets_vel({tvel}));
    return t.val(loss.total).item();
  };
  model.params.zero_grads();
  {
    ad::Tape<double> t;
    auto dec = model.decode(t, model.encode(t, batch), batch, act);
    auto loss = model.loss(t, dec, model.normalize_targets_pos({tpos}),
                           model.normalize_targets_vel({tvel}));
    t.backward(loss.total);
  }

  const double h = 1e-4;
  double max_rel = 0.0;
  long checked = 0;
  for (auto& [name, p] : model.params.params) {
    for (Eigen::Index i = 0; i < p.value.numel(); ++i) {
      const double orig = p.value.data[i];
      p.value.data[i] = orig + h;
      const double fp = eval();
      p.value.data[i] = orig - h;
      const double fm = eval();
      p.value.data[i] = orig;
      const double fd = (fp - fm) / (2 * h);
      const double an = p.grad.data[i];
      const double diff = std::max(0.0, std::abs(an - fd) - 1e-7);
      max_rel = std::max(max_rel, diff / std::max({1e-6, std::abs(an), std::abs(fd)}));
      checked += 1;
    }
  }
  Outcome out;
  out.pass = max_rel < 1e-3;
  out.detail = std::to_string(checked) + " params, max rel err " + fmt(max_rel) + " (< 1e-3)";
  return out;
}

// ---------------------------------------------------------------------------
// 3. anti-collapse
// ---------------------------------------------------------------------------

double velocity_std_ratio(const wm::WorldModel<float>& model,
                          const std::vector<wm::WmSample>& samples) {
  // per-dim std of predicted vs true next velocities, averaged over x and y
  std::vector<double> pred_all_x, pred_all_y;
  double truth_sq_x = 0, truth_sq_y = 0, truth_mean_x = 0, truth_mean_y = 0;
  long n = 0;
  double pred_sq_x = 0, pred_sq_y = 0, pred_mean_x = 0, pred_mean_y = 0;
  for (const auto& s : samples) {
    auto pred = wm::predict(model, s.cloud, s.action, 1);
    for (int i = 0; i < pred.velocities.rows(); ++i) {
      pred_mean_x += pred.velocities(i, 0);
      pred_mean_y += pred.velocities(i, 1);
      pred_sq_x += pred.velocities(i, 0) * pred.velocities(i, 0);
      pred_sq_y += pred.velocities(i, 1) * pred.velocities(i, 1);
      truth_mean_x += s.next_velocities(i, 0);
      truth_mean_y += s.next_velocities(i, 1);
      truth_sq_x += s.next_velocities(i, 0) * s.next_velocities(i, 0);
      truth_sq_y += s.next_velocities(i, 1) * s.next_velocities(i, 1);
      n += 1;
    }
  }
  const double pstd_x = std::sqrt(std::max(0.0, pred_sq_x / n - std::pow(pred_mean_x / n, 2)));
  const double pstd_y = std::sqrt(std::max(0.0, pred_sq_y / n - std::pow(pred_mean_y / n, 2)));
  const double tstd_x = std::sqrt(std::max(0.0, truth_sq_x / n - std::pow(truth_mean_x / n, 2)));
  const double tstd_y = std::sqrt(std::max(0.0, truth_sq_y / n - std::pow(truth_mean_y / n, 2)));
  return 0.5 * (pstd_x / tstd_x + pstd_y / tstd_y);
}

Outcome check_anti_collapse() {
  // sparse-motion data: in every frame roughly 10% of the points move, but
  // which points will be moving in the NEXT frame is a fresh random subset,
  // unpredictable from the input. Plain MSE then prefers near-zero velocity
  // predictions; the dispersion term must keep the spread alive.
  wm::WMConfig cfg;
  cfg.patches_target = 4;
  cfg.patches_obstacle = 2;
  cfg.patches_ee = 2;
  cfg.k = 8;
  cfg.dim = 24;
  cfg.blocks = 1;
  cfg.heads = 2;

  Pcg32 rng(71);
  const PhysPointCloud base = role_cloud(48, 32, 16, rng, 0.0);
  const double dt = 0.1;
  auto mover_field = [&](int sample_idx) {
    Eigen::MatrixX3d v = Eigen::MatrixX3d::Zero(base.size(), 3);
    Pcg32 pick(derive_seed(71, 0x5e7u, static_cast<std::uint64_t>(sample_idx)));
    for (int i = 0; i < base.size(); ++i) {
      if (pick.next_double() < 0.1) {
        v(i, 0) = 0.4 * pick.normal();
        v(i, 1) = 0.4 * pick.normal();
      }
    }
    return v;
  };
  std::vector<wm::WmSample> samples;
  for (int s = 0; s < 96; ++s) {
    const Eigen::MatrixX3d v_now = mover_field(s);
    const Eigen::MatrixX3d v_next = mover_field(s + 100000);  // independent subset
    wm::WmSample smp;
    smp.cloud = base;
    smp.cloud.velocities() = v_now;
    smp.action.setZero();
    smp.next_positions = base.positions() + dt * v_next;
    smp.next_velocities = v_next;
    samples.push_back(std::move(smp));
  }

  wm::WmTrainConfig tc;
  tc.epochs = 60;
  tc.batch = 16;
  tc.lr = 2e-3;
  tc.lr_min = 2e-4;
  tc.seed = 5;

  wm::WMConfig with_var = cfg;  // lambda_var = 100 by default
  auto trained_var = wm::train_world_model(samples, with_var, tc);
  const double ratio_var = velocity_std_ratio(trained_var.model, samples);

  wm::WMConfig no_var = cfg;
  no_var.lambda_var = 0.0;
  auto trained_novar = wm::train_world_model(samples, no_var, tc);
  const double ratio_novar = velocity_std_ratio(trained_novar.model, samples);

  Outcome out;
  out.pass = ratio_var >= 0.5 && ratio_novar < 0.2;
  out.detail = "std ratio with lambda_var=100: " + fmt(ratio_var) + " (>= 0.5), with 0: " +
               fmt(ratio_novar) + " (< 0.2)";
  return out;
}

// ---------------------------------------------------------------------------
// 4. physics sanity
// ---------------------------------------------------------------------------

Outcome check_physics_sanity() {
  sim::SimConfig cfg;
  cfg.arm_base = {0.0, 10.0};
  cfg.workspace_half = 20.0;

  // frictionless equal-mass elastic exchange
  auto disc = [&](double x, double vx) {
    auto b = sim::RigidBody::make(ConvexPolygon::make_regular(16, 0.05, M_PI / 16), 0.4,
                                  sim::BodyRole::Obstacle);
    b.pose.p = {x, 0};
    b.vel = {vx, 0};
    b.restitution = 1.0;
    b.mu_s = b.mu_d = 0.0;
    b.ground_mu = 0.0;
    return b;
  };
  sim::SceneState s;
  s.bodies = {disc(-0.12, 0.5), disc(0.12, -0.5)};
  s.bodies[0].role = sim::BodyRole::Target;
  for (int i = 0; i < 6; ++i) s = sim::step(s, Eigen::Vector3d::Zero(), cfg).state;
  const double err = std::max(std::abs(s.bodies[0].vel.x() + 0.5),
                              std::abs(s.bodies[1].vel.x() - 0.5));
  if (err > 1e-6) return {false, "elastic exchange error " + fmt(err) + " m/s (> 1e-6)"};

  // zero-input static scenes drift below 1e-9 per step
  auto lib = gen::make_procedural_library(2024, 6, 6);
  gen::GenConfig gcfg;
  sim::SimConfig table_cfg;
  auto task = gen::generate_scene(gen::Difficulty::Moderate, lib, 77, gcfg, table_cfg);
  sim::SceneState scene = task.scene;
  double max_step_drift = 0.0;
  for (int i = 0; i < 10; ++i) {
    sim::SceneState next = sim::step(scene, Eigen::Vector3d::Zero(), table_cfg).state;
    for (std::size_t b = 0; b < scene.bodies.size(); ++b)
      max_step_drift =
          std::max(max_step_drift, (next.bodies[b].pose.p - scene.bodies[b].pose.p).norm());
    scene = next;
  }
  if (max_step_drift > 1e-9)
    return {false, "static drift " + fmt(max_step_drift) + " m/step (> 1e-9)"};

  // 50 idle steps displace generated bodies by less than 5 mm
  double max_total = 0.0;
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    auto t2 = gen::generate_scene(gen::Difficulty::Dense, lib, seed, gcfg, table_cfg);
    sim::SceneState s2 = t2.scene;
    for (int i = 0; i < 50; ++i) s2 = sim::step(s2, Eigen::Vector3d::Zero(), table_cfg).state;
    for (std::size_t b = 0; b < s2.bodies.size(); ++b)
      max_total = std::max(max_total, (s2.bodies[b].pose.p - t2.scene.bodies[b].pose.p).norm());
  }
  if (max_total > 0.005)
    return {false, "idle displacement " + fmt(max_total) + " m (> 5 mm)"};

  return {true, "exchange err " + fmt(err) + ", drift " + fmt(max_step_drift) + ", idle move " +
                    fmt(max_total)};
}

// ---------------------------------------------------------------------------
// 5. jacobian + cartesian clipping
// ---------------------------------------------------------------------------

Outcome check_jacobian_clipping() {
  Pcg32 rng(17);
  sim::ArmState arm;
  double max_fd_err = 0.0;
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    for (int i = 0; i < 3; ++i) arm.q[i] = rng.uniform(-2.5, 2.5);
    const Eigen::Matrix3d j = sim::jacobian(arm);
    for (int i = 0; i < 3; ++i) {
      sim::ArmState plus = arm, minus = arm;
      plus.q[i] += h;
      minus.q[i] -= h;
      const Pose2 fp = sim::forward_kinematics(plus), fm = sim::forward_kinematics(minus);
      const Eigen::Vector3d fd((fp.p.x() - fm.p.x()) / (2 * h), (fp.p.y() - fm.p.y()) / (2 * h),
                               wrap_angle(fp.theta - fm.theta) / (2 * h));
      max_fd_err = std::max(max_fd_err, (j.col(i) - fd).cwiseAbs().maxCoeff());
    }
  }
  if (max_fd_err >= 1e-5) return {false, "jacobian fd error " + fmt(max_fd_err) + " (>= 1e-5)"};

  deploy::ClipConfig ccfg;
  ccfg.lambda = 0.0;
  double max_bound_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    for (int i = 0; i < 3; ++i) arm.q[i] = rng.uniform(-2.0, 2.0);
    Eigen::Vector3d dq(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15));
    const Eigen::Matrix3d j = sim::jacobian(arm);
    if ((j * dq).norm() <= ccfg.eps_x) continue;
    const Eigen::Vector3d clamped = deploy::clip_action(dq, arm, ccfg);
    max_bound_err = std::max(max_bound_err, std::abs((j * clamped).norm() - ccfg.eps_x));
  }
  if (max_bound_err >= 1e-9)
    return {false, "clipped |J dq| misses eps_x by " + fmt(max_bound_err) + " (>= 1e-9)"};
  return {true, "jacobian fd err " + fmt(max_fd_err) + ", clip bound err " + fmt(max_bound_err)};
}

// ---------------------------------------------------------------------------
// 6. EKF benefit
// ---------------------------------------------------------------------------

Outcome check_ekf_benefit() {
  const double dt = 0.1, sigma = 0.005;
  double mse_ekf = 0, mse_fd = 0;
  long count = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Pcg32 rng(500 + static_cast<std::uint64_t>(trial));
    const Eigen::Vector2d v_true(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    deploy::EkfState s = deploy::EkfState::from_pose({{0, 0}, 0});
    Pose2 truth{{0, 0}, 0};
    Pose2 prev = truth;
    for (int i = 0; i < 500; ++i) {
      truth.p += dt * v_true;
      Pose2 meas = truth;
      meas.p.x() += sigma * rng.normal();
      meas.p.y() += sigma * rng.normal();
      meas.theta += sigma * rng.normal();
      s = deploy::ekf_update(s, meas, dt);
      if (i >= 20) {
        mse_ekf += (s.velocity().head<2>() - v_true).squaredNorm();
        mse_fd += ((meas.p - prev.p) / dt - v_true).squaredNorm();
        count += 1;
      }
      prev = meas;
    }
  }
  mse_ekf /= count;
  mse_fd /= count;
  Outcome out;
  out.pass = mse_ekf < mse_fd;
  out.detail = "EKF velocity MSE " + fmt(mse_ekf) + " vs finite-difference " + fmt(mse_fd);
  return out;
}

// ---------------------------------------------------------------------------
// 7. oracle equivalences
// ---------------------------------------------------------------------------

Outcome check_oracle_equivalences() {
  Pcg32 rng(99);
  // FPS vs brute force
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 16 + rng.uniform_int(49);
    PhysPointCloud cloud(n);
    for (int i = 0; i < n; ++i)
      cloud.positions().row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0;
    const int k = 1 + rng.uniform_int(n);
    auto sel = farthest_point_sample(cloud, k, static_cast<std::uint64_t>(trial));
    std::vector<int> oracle{sel[0]};
    while (static_cast<int>(oracle.size()) < k) {
      int best = -1;
      double bd = -1;
      for (int i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (int o : oracle)
          dmin = std::min(dmin, (cloud.positions().row(i) - cloud.positions().row(o)).squaredNorm());
        if (dmin > bd) {
          bd = dmin;
          best = i;
        }
      }
      oracle.push_back(best);
    }
    if (sel != oracle) return {false, "FPS diverged from the brute-force oracle"};
  }

  // chamfer vs the all-pairs oracle
  for (int trial = 0; trial < 6; ++trial) {
    const int na = 1 + rng.uniform_int(128), nb = 1 + rng.uniform_int(128);
    Eigen::MatrixX3d a(na, 3), b(nb, 3);
    for (int i = 0; i < na; ++i) a.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
    for (int i = 0; i < nb; ++i) b.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
    Eigen::MatrixXd d(na, nb);
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < nb; ++j) d(i, j) = (a.row(i) - b.row(j)).norm();
    const double oracle = 0.5 * (d.rowwise().minCoeff().mean() + d.colwise().minCoeff().mean());
    if (std::abs(chamfer_distance(a, b) - oracle) > 1e-12)
      return {false, "chamfer diverged from the all-pairs oracle"};
  }

  // unpatchify scatter-average vs per-point oracle, exact
  wm::WMConfig cfg;
  cfg.patches_target = 2;
  cfg.patches_obstacle = 1;
  cfg.patches_ee = 1;
  cfg.k = 4;
  cfg.dim = 12;
  cfg.blocks = 1;
  cfg.heads = 2;
  PhysPointCloud cloud = role_cloud(16, 12, 8, rng, 0.2);
  wm::TokenBatch tb = wm::tokenize(cloud, cfg, 3);
  const int P = cfg.total_patches(), D = 5, N = cloud.size();
  ad::Tensor<float> tokens({P, D});
  for (Eigen::Index i = 0; i < tokens.numel(); ++i) tokens.data[i] = float(rng.normal());
  ad::Tape<float> t;
  auto scattered =
      ad::scatter_mean(t, ad::gather_rows(t, t.constant(tokens), tb.pair_patch), tb.pair_point, N);
  const auto got = t.val(scattered);
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
    int cnt = 0;
    for (std::size_t pr = 0; pr < tb.pair_point.size(); ++pr) {
      if (tb.pair_point[pr] != i) continue;
      for (int d2 = 0; d2 < D; ++d2) mean[d2] += double(tokens.data[tb.pair_patch[pr] * D + d2]);
      cnt += 1;
    }
    mean /= cnt;
    for (int d2 = 0; d2 < D; ++d2)
      if (std::abs(double(got.data[i * D + d2]) - mean[d2]) > 1e-6)
        return {false, "unpatchify average mismatch at point " + std::to_string(i)};
  }
  return {true, "FPS, chamfer, unpatchify all match their oracles"};
}

// ---------------------------------------------------------------------------
// 8. desk-scale learning
// ---------------------------------------------------------------------------

std::vector<gen::TaskInstance> one_object_tasks(int count, std::uint64_t seed_base) {
  auto lib = gen::make_procedural_library(2024, 8, 8);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  std::vector<gen::TaskInstance> tasks;
  for (int i = 0; i < count; ++i) {
    auto task = gen::generate_scene(gen::Difficulty::Sparse, lib, seed_base + static_cast<std::uint64_t>(i),
                                    gcfg, sim_cfg);
    // sparse-track generator with zero obstacles: keep only the target
    std::vector<sim::RigidBody> only_target{task.scene.bodies[static_cast<std::size_t>(task.target_body)]};
    task.scene.bodies = std::move(only_target);
    task.target_body = 0;
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<gen::TaskInstance> sparse_tasks(int count, std::uint64_t seed_base) {
  auto lib = gen::make_procedural_library(2024, 8, 8);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  std::vector<gen::TaskInstance> tasks;
  for (int i = 0; i < count; ++i)
    tasks.push_back(gen::generate_scene(gen::Difficulty::Sparse,
                                        lib, seed_base + static_cast<std::uint64_t>(i), gcfg, sim_cfg));
  return tasks;
}

// Quick dynamics pretraining: random-action rollouts followed by a short
// world-model fit, the standard way to obtain the frozen encoder.
wm::WorldModel<float> pretrain_encoder(const std::vector<gen::TaskInstance>& tasks,
                                       const wm::WMConfig& wm_cfg, long steps, int epochs,
                                       std::uint64_t seed, const std::string& dir) {
  rl::PolicyBundle random_policy;
  random_policy.encoder = wm::WorldModel<float>::init(wm_cfg, derive_seed(seed, 0x11u));
  sim::SimConfig sim_cfg;
  for (const auto& task : tasks) {
    sim::SceneCloudRenderer r(task.scene, random_policy.budgets, sim_cfg, task.seed);
    random_policy.encoder.stats = update_running_stats(random_policy.encoder.stats, r.render(task.scene));
  }
  Pcg32 rng(derive_seed(seed, 0x22u));
  rl::build_policy_params(random_policy.policy, rng, rl::kEnvStateDim, wm_cfg.dim,
                          random_policy.policy_cfg);
  // wide exploration noise so collisions appear in the data
  random_policy.policy.at("log_std").value.data.setConstant(std::log(0.3f));

  cur::CollectOptions copt;
  copt.sim = sim_cfg;
  copt.budgets = random_policy.budgets;
  copt.action_scale = 0.1;
  copt.episode_cap = 120;
  copt.seed = derive_seed(seed, 0x33u);
  auto manifest = cur::collect_rollouts(random_policy, tasks, steps, dir, copt);
  auto samples = cur::load_samples(dir, manifest);

  wm::WmTrainConfig tc;
  tc.epochs = epochs;
  tc.batch = 32;
  tc.seed = derive_seed(seed, 0x44u);
  return wm::train_world_model(samples, wm_cfg, tc).model;
}

Outcome check_desk_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_min = [&] {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0)
               .count() /
           60.0;
  };

  // --- part (a): 1-object push-to-goal reaches 80% within 2000 iterations ---
  auto tasks1 = one_object_tasks(8, 3000);
  const std::string wm_dir = temp_dir("desk_wm");
  wm::WMConfig wm_cfg;  // desk defaults
  auto encoder = pretrain_encoder(tasks1, wm_cfg, 2500, 5, 91, wm_dir);

  rl::PpoOptions opt;
  opt.iterations = 2000;
  opt.stop_success_rate = 80.0;
  opt.stop_min_episodes = 200;
  opt.seed = 7;
  opt.schedule.decay_iterations = 600;
  auto result = rl::ppo_train(tasks1, encoder, opt);
  const double final_rate = result.curve.empty() ? 0.0 : result.curve.back().success_rate;
  const bool part_a = final_rate >= 80.0 && result.iterations_run <= 2000;
  std::string detail_a = "1-object: " + fmt(final_rate) + "% after " +
                         std::to_string(result.iterations_run) + " iterations";
  std::cout << "    [desk_learning] " << detail_a << " (" << fmt(elapsed_min()) << " min)\n";

  // --- part (b): dynamics-conditioned AUC beats no-pretrain over 3 seeds ----
  auto tasks4 = sparse_tasks(8, 4000);
  const std::string wm_dir2 = temp_dir("desk_wm4");
  auto encoder4 = pretrain_encoder(tasks4, wm_cfg, 2500, 5, 92, wm_dir2);

  const int auc_iterations = 100;
  double auc_dyn = 0.0, auc_nopre = 0.0;
  struct Job {
    std::uint64_t seed;
    bool no_pretrain;
    double auc = 0.0;
  };
  std::vector<Job> jobs;
  for (std::uint64_t s : {11u, 12u, 13u}) {
    jobs.push_back({s, false});
    jobs.push_back({s, true});
  }
  std::vector<std::thread> pool;
  const int workers = 2;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = static_cast<std::size_t>(w); i < jobs.size(); i += workers) {
        rl::PpoOptions o;
        o.iterations = auc_iterations;
        o.seed = jobs[i].seed;
        o.no_pretrain = jobs[i].no_pretrain;
        o.schedule.decay_iterations = 600;
        wm::WorldModel<float> enc = encoder4;
        if (jobs[i].no_pretrain)
          enc = wm::WorldModel<float>::init(wm_cfg, derive_seed(jobs[i].seed, 0x99u));
        if (jobs[i].no_pretrain) enc.stats = encoder4.stats;
        auto res = rl::ppo_train(tasks4, enc, o);
        double auc = 0;
        for (const auto& row : res.curve) auc += row.success_rate;
        jobs[i].auc = auc;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& j : jobs) (j.no_pretrain ? auc_nopre : auc_dyn) += j.auc;

  const bool part_b = auc_dyn > auc_nopre;
  Outcome out;
  out.pass = part_a && part_b;
  out.detail = detail_a + "; AUC dyn " + fmt(auc_dyn) + " vs no-pretrain " + fmt(auc_nopre) +
               " over 3 seeds (" + fmt(elapsed_min()) + " min total)";
  fs::remove_all(wm_dir);
  fs::remove_all(wm_dir2);
  return out;
}

// ---------------------------------------------------------------------------
// 9. curriculum property
// ---------------------------------------------------------------------------

Outcome check_curriculum_property() {
  const std::string dir = temp_dir("curriculum");
  auto train_tasks = sparse_tasks(6, 5000);
  auto eval_tasks = sparse_tasks(4, 6000);

  cur::CurriculumConfig cfg;
  cfg.rounds = 2;
  cfg.collect_steps = 2500;
  cfg.bootstrap_threshold_pct = 10.0;
  cfg.bootstrap_iterations = 40;
  cfg.ppo_iterations = 60;
  cfg.wm_epochs = 6;
  cfg.heldout_episodes = 6;
  cfg.eval_scenes = 4;
  cfg.stop_success_delta_pct = -1.0;  // always run both rounds
  cfg.wm = wm::WMConfig();            // desk defaults
  cfg.wm_train.batch = 32;
  cfg.ppo.seed = 31;
  cfg.ppo.schedule.decay_iterations = 600;

  auto state = cur::run_curriculum(train_tasks, eval_tasks, cfg, dir, 31);
  if (state.rounds.size() < 2) return {false, "curriculum did not complete two rounds"};

  const double e0 = state.rounds[0].wm_heldout_cm;
  const double e1 = state.rounds[1].wm_heldout_cm;
  const bool non_increasing = e1 <= e0 * 1.05;

  // frozen-encoder lineage: the policy of round r carries exactly the round-r
  // world model, hash and parameters both
  bool lineage = true;
  for (int r = 0; r < 2; ++r) {
    const std::string rtag = "round" + std::to_string(r);
    auto bundle = rl::PolicyBundle::load((fs::path(dir) / (rtag + "_policy.ck")).string());
    auto wm_ck = ad::Checkpoint::load((fs::path(dir) / (rtag + "_wm.ck")).string());
    lineage = lineage && bundle.wm_parent_hash == hex64(wm_ck.content_hash());
    lineage = lineage && bundle.wm_parent_hash == state.rounds[static_cast<std::size_t>(r)].wm_hash;
    auto wm_model = wm::WorldModel<float>::from_checkpoint(wm_ck);
    for (const auto& [name, p] : wm_model.params.params)
      lineage = lineage && (bundle.encoder.params.at(name).value.data == p.value.data).all();
  }

  Outcome out;
  out.pass = non_increasing && lineage;
  out.detail = "wm heldout " + fmt(e0) + " -> " + fmt(e1) + " cm (5% margin " +
               (non_increasing ? "ok" : "violated") + "), lineage " + (lineage ? "ok" : "broken");
  if (out.pass) fs::remove_all(dir);
  return out;
}

// ---------------------------------------------------------------------------
// 10. benchmark protocol fidelity
// ---------------------------------------------------------------------------

Outcome check_protocol_fidelity() {
  auto lib = gen::make_procedural_library(2024, 8, 8);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  const int counts[3] = {4, 8, 12};
  const gen::Difficulty tracks[3] = {gen::Difficulty::Sparse, gen::Difficulty::Moderate,
                                     gen::Difficulty::Dense};
  for (int i = 0; i < 3; ++i) {
    auto task = gen::generate_scene(tracks[i], lib, 900 + static_cast<std::uint64_t>(i), gcfg, sim_cfg);
    if (static_cast<int>(task.scene.bodies.size()) != counts[i])
      return {false, gen::difficulty_name(tracks[i]) + " track has " +
                         std::to_string(task.scene.bodies.size()) + " bodies"};
  }

  // success thresholds and strictness
  rl::RewardConfig rcfg;
  if (rcfg.tau_p != 0.05 || rcfg.tau_r != 0.1) return {false, "success thresholds not 0.05/0.1"};
  sim::SceneState s;
  auto target = sim::RigidBody::make(ConvexPolygon::make_box(0.05, 0.04), 0.2, sim::BodyRole::Target);
  target.pose.p = {0.5, 0.5};
  s.bodies.push_back(target);
  if (!sim::check_success(s, Pose2{{0.5 + 0.049, 0.5}, 0.099}, 0.05, 0.1))
    return {false, "success rejected inside both thresholds"};
  if (sim::check_success(s, Pose2{{0.5 + 0.05, 0.5}, 0.0}, 0.05, 0.1))
    return {false, "success boundary is not strict"};

  // episode cap, report fields
  rl::PPOConfig pcfg;
  rl::EvalOptions eopt;
  if (pcfg.episode_cap != 300 || eopt.episode_cap != 300)
    return {false, "episode cap default is not 300"};

  rl::PolicyBundle idle;
  wm::WMConfig wcfg;
  wcfg.patches_target = 2;
  wcfg.patches_obstacle = 2;
  wcfg.patches_ee = 1;
  wcfg.k = 6;
  wcfg.dim = 12;
  wcfg.blocks = 1;
  wcfg.heads = 2;
  idle.encoder = wm::WorldModel<float>::init(wcfg, 3);
  idle.encoder.stats.count = 1;
  idle.encoder.stats.mean.setZero();
  idle.encoder.stats.m2.setOnes();
  idle.policy_cfg.fusion_hidden = {16, 8};
  Pcg32 rng(5);
  rl::build_policy_params(idle.policy, rng, rl::kEnvStateDim, wcfg.dim, idle.policy_cfg);
  for (auto& [name, p] : idle.policy.params)
    if (name.rfind("actor", 0) == 0) p.value.data.setZero();
  idle.budgets = {24, 24, 12};

  auto task = gen::generate_scene(gen::Difficulty::Sparse, lib, 950, gcfg, sim_cfg);
  rl::EvalOptions opt;
  opt.sim = sim_cfg;
  opt.episode_cap = 20;
  auto report = rl::evaluate_track(idle, {task}, gen::Difficulty::Sparse, opt);
  if (report.mean_steps != 20) return {false, "idle episode did not run to the cap"};
  if (report.success_rate_pct != 0.0 || report.mean_offset_cm != 0.0)
    return {false, "idle policy should score 0% success with zero offset"};

  return {true, "counts 4/8/12, thresholds 0.05 m / 0.1 rad strict, cap honored, S.R./M.O. reported"};
}

// ---------------------------------------------------------------------------
// 11. reproducibility
// ---------------------------------------------------------------------------

Outcome check_reproducibility() {
  const std::string root = temp_dir("repro");
  const std::string cli = PUSHDYN_CLI_PATH;
  auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };

  // scene generation twice
  if (run("gen-scenes --difficulty sparse --count 3 --seed 5 --out " + root + "/g1") != 0)
    return {false, "gen-scenes failed"};
  if (run("gen-scenes --difficulty sparse --count 3 --seed 5 --out " + root + "/g2") != 0)
    return {false, "gen-scenes failed"};

  auto only_dir = [](const std::string& p) {
    for (const auto& e : fs::directory_iterator(p)) return e.path();
    throw std::runtime_error("empty run root " + p);
  };
  for (const auto& e : fs::directory_iterator(only_dir(root + "/g1") / "scenes")) {
    const auto other = only_dir(root + "/g2") / "scenes" / e.path().filename();
    if (file_fnv1a64(e.path().string()) != file_fnv1a64(other.string()))
      return {false, "scene files differ between identical runs"};
  }

  // a dataset + world-model training twice -> byte-identical metrics CSV
  auto tasks = sparse_tasks(2, 7000);
  rl::PolicyBundle prior;
  wm::WMConfig wcfg;
  wcfg.patches_target = 2;
  wcfg.patches_obstacle = 2;
  wcfg.patches_ee = 1;
  wcfg.k = 6;
  wcfg.dim = 12;
  wcfg.blocks = 1;
  wcfg.heads = 2;
  prior.encoder = wm::WorldModel<float>::init(wcfg, 3);
  prior.encoder.stats.count = 1;
  prior.encoder.stats.mean.setZero();
  prior.encoder.stats.m2.setOnes();
  prior.policy_cfg.fusion_hidden = {16, 8};
  Pcg32 rng(5);
  rl::build_policy_params(prior.policy, rng, rl::kEnvStateDim, wcfg.dim, prior.policy_cfg);
  prior.budgets = {24, 24, 12};
  cur::CollectOptions copt;
  copt.sim = sim::SimConfig();
  copt.budgets = prior.budgets;
  copt.episode_cap = 10;
  copt.seed = 3;
  cur::collect_rollouts(prior, tasks, 30, root + "/data", copt);

  const std::string small = " --set wm.patches_target=2 --set wm.patches_obstacle=2"
                            " --set wm.patches_ee=1 --set wm.k=6 --set wm.dim=12"
                            " --set wm.blocks=1 --set wm.heads=2 --set wm_train.epochs=2"
                            " --set budgets.target=24 --set budgets.obstacle=24"
                            " --set budgets.end_effector=12";
  if (run("train-wm --data " + root + "/data --seed 9 --out " + root + "/w1" + small) != 0)
    return {false, "train-wm failed"};
  if (run("train-wm --data " + root + "/data --seed 9 --out " + root + "/w2" + small) != 0)
    return {false, "train-wm failed"};
  const auto csv1 = only_dir(root + "/w1") / "wm_train.csv";
  const auto csv2 = only_dir(root + "/w2") / "wm_train.csv";
  if (file_fnv1a64(csv1.string()) != file_fnv1a64(csv2.string()))
    return {false, "wm_train.csv differs between identical runs"};

  // short policy training twice -> byte-identical learning curve
  const std::string wm_ck = (only_dir(root + "/w1") / "worldmodel.ck").string();
  if (run("gen-scenes --difficulty sparse --count 2 --seed 15 --out " + root + "/bench") != 0)
    return {false, "gen-scenes failed"};
  const std::string manifest = (only_dir(root + "/bench") / "manifest.json").string();
  const std::string ppo_small = small +
                                " --set ppo.envs=2 --set ppo.horizon=6 --set ppo.epochs=1"
                                " --set ppo.minibatches=1 --set policy.fusion_hidden=[8]";
  if (run("train-policy --manifest " + manifest + " --track sparse --wm " + wm_ck +
          " --iterations 2 --seed 4 --out " + root + "/p1" + ppo_small) != 0)
    return {false, "train-policy failed"};
  if (run("train-policy --manifest " + manifest + " --track sparse --wm " + wm_ck +
          " --iterations 2 --seed 4 --out " + root + "/p2" + ppo_small) != 0)
    return {false, "train-policy failed"};
  if (file_fnv1a64((only_dir(root + "/p1") / "curve.csv").string()) !=
      file_fnv1a64((only_dir(root + "/p2") / "curve.csv").string()))
    return {false, "curve.csv differs between identical runs"};

  fs::remove_all(root);
  return {true, "scene files, wm_train.csv, and curve.csv byte-identical across reruns"};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Check> checks{
      {"formula_fidelity", check_formula_fidelity},
      {"wm_gradcheck", check_wm_gradcheck},
      {"anti_collapse", check_anti_collapse},
      {"physics_sanity", check_physics_sanity},
      {"jacobian_clipping", check_jacobian_clipping},
      {"ekf_benefit", check_ekf_benefit},
      {"oracle_equivalences", check_oracle_equivalences},
      {"desk_learning", check_desk_learning},
      {"curriculum_property", check_curriculum_property},
      {"protocol_fidelity", check_protocol_fidelity},
      {"reproducibility", check_reproducibility},
  };

  std::string only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = argv[++i];
    if (std::strcmp(argv[i], "--list") == 0) {
      for (const auto& c : checks) std::cout << c.name << "\n";
      return 0;
    }
  }

  int failures = 0;
  for (const auto& c : checks) {
    if (!only.empty() && c.name != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
            .count() /
        1000.0;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << o.detail << "  ("
              << fmt(secs) << " s)" << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
