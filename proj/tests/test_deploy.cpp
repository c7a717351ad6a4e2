#include <doctest.h>

#include "pushdyn/deploy/clip.hpp"
#include "pushdyn/deploy/distill.hpp"
#include "pushdyn/deploy/ekf.hpp"
#include "pushdyn/deploy/schedule.hpp"
#include "pushdyn/rl/ppo.hpp"

using namespace pushdyn;
using namespace pushdyn::deploy;

TEST_CASE("EKF converges to the true velocity on a clean constant-velocity stream") {
  const double dt = 0.1;
  const Eigen::Vector3d v_true(0.2, -0.1, 0.3);
  EkfState s = EkfState::from_pose({{0, 0}, 0});
  Pose2 pose{{0, 0}, 0};
  for (int i = 0; i < 50; ++i) {
    pose.p += dt * v_true.head<2>();
    pose.theta = wrap_angle(pose.theta + dt * v_true[2]);
    s = ekf_update(s, pose, dt);
  }
  CHECK((s.velocity() - v_true).norm() < 1e-3);
}

TEST_CASE("EKF with stationary measurements drives velocity to zero") {
  EkfState s = EkfState::from_pose({{0.3, -0.2}, 0.5});
  s.x.tail<3>() << 0.4, -0.4, 0.8;  // wrong initial velocity belief
  s.process_noise.setZero();        // pure measurement-driven decay
  for (int i = 0; i < 200; ++i) s = ekf_update(s, {{0.3, -0.2}, 0.5}, 0.1);
  CHECK(s.velocity().norm() < 1e-4);
}

TEST_CASE("EKF velocity beats raw finite differences under measurement noise") {
  const double dt = 0.1, sigma = 0.005;
  int wins = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Pcg32 rng(100 + static_cast<std::uint64_t>(trial));
    const Eigen::Vector2d v_true(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    EkfState s = EkfState::from_pose({{0, 0}, 0});
    Pose2 truth{{0, 0}, 0};
    Pose2 prev_meas = truth;
    double mse_ekf = 0, mse_fd = 0;
    int count = 0;
    for (int i = 0; i < 500; ++i) {
      truth.p += dt * v_true;
      Pose2 meas = truth;
      meas.p.x() += sigma * rng.normal();
      meas.p.y() += sigma * rng.normal();
      meas.theta += sigma * rng.normal();
      s = ekf_update(s, meas, dt);
      if (i >= 20) {  // skip the transient
        mse_ekf += (s.velocity().head<2>() - v_true).squaredNorm();
        mse_fd += ((meas.p - prev_meas.p) / dt - v_true).squaredNorm();
        count += 1;
      }
      prev_meas = meas;
    }
    if (mse_ekf / count < mse_fd / count) wins += 1;
  }
  CHECK(wins == 20);
}

TEST_CASE("EKF covariance stays symmetric positive definite under random updates") {
  Pcg32 rng(7);
  EkfState s = EkfState::from_pose({{0, 0}, 0});
  for (int i = 0; i < 10000; ++i) {
    Pose2 meas{{rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(-3, 3)};
    s = ekf_update(s, meas, 0.05);
    if (i % 500 == 0) {
      CHECK((s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(s.covariance);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("clip_action branch behavior") {
  sim::ArmState arm;
  arm.q = {0.4, -0.7, 0.5};
  ClipConfig cfg;
  cfg.eps_x = 0.02;

  // small command passes through exactly
  const Eigen::Matrix3d j = sim::jacobian(arm);
  Eigen::Vector3d dq_small(0.001, -0.001, 0.002);
  REQUIRE((j * dq_small).norm() < cfg.eps_x / 2);
  CHECK(clip_action(dq_small, arm, cfg) == dq_small);

  // lambda = 0 with full-rank J: the clipped command lands exactly on the bound
  ClipConfig exact = cfg;
  exact.lambda = 0.0;
  Eigen::Vector3d dq_big(0.08, 0.06, -0.09);
  const double norm_before = (j * dq_big).norm();
  REQUIRE(norm_before > 2 * cfg.eps_x);
  auto res = clip_action_detailed(dq_big, arm, exact);
  CHECK(res.clipped);
  CHECK((j * res.dq).norm() == doctest::Approx(cfg.eps_x).epsilon(1e-9));

  // heavy damping barely changes the command
  ClipConfig heavy = cfg;
  heavy.lambda = 1e3;
  auto soft = clip_action(dq_big, arm, heavy);
  CHECK((soft - dq_big).norm() < 1e-3 * dq_big.norm());
}

TEST_CASE("clip_action never increases the Cartesian magnitude") {
  Pcg32 rng(11);
  sim::ArmState arm;
  ClipConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    for (int i = 0; i < 3; ++i) arm.q[i] = rng.uniform(-2.5, 2.5);
    Eigen::Vector3d dq(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    const Eigen::Matrix3d j = sim::jacobian(arm);
    const double before = (j * dq).norm();
    const double after = (j * clip_action(dq, arm, cfg)).norm();
    CHECK(after <= std::max(before, cfg.eps_x) + 1e-9);
  }
}

TEST_CASE("action schedule endpoints, midpoint, monotonicity") {
  ActionSchedule s;
  s.decay_iterations = 1000;
  CHECK(scheduled_scale(0, s) == 0.1);
  CHECK(scheduled_scale(1000, s) == 0.01);
  CHECK(scheduled_scale(5000, s) == 0.01);
  CHECK(scheduled_scale(500, s) == doctest::Approx(0.055).epsilon(1e-12));
  double prev = 1.0;
  for (int i = 0; i < 1500; i += 10) {
    const double v = scheduled_scale(i, s);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
  ActionSchedule bad;
  bad.final_scale = 0.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("distillation: sigma=0 self-distillation starts at (near) zero loss") {
  auto lib = gen::make_procedural_library(55, 4, 4);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  std::vector<gen::TaskInstance> tasks{
      gen::generate_scene(gen::Difficulty::Sparse, lib, 500, gcfg, sim_cfg)};

  // tiny teacher bundle
  rl::PolicyBundle teacher;
  wm::WMConfig wcfg;
  wcfg.patches_target = 2;
  wcfg.patches_obstacle = 2;
  wcfg.patches_ee = 1;
  wcfg.k = 6;
  wcfg.dim = 12;
  wcfg.blocks = 1;
  wcfg.heads = 2;
  teacher.encoder = wm::WorldModel<float>::init(wcfg, 3);
  teacher.encoder.stats.count = 1;
  teacher.encoder.stats.mean.setZero();
  teacher.encoder.stats.m2.setOnes();
  teacher.policy_cfg.fusion_hidden = {16, 8};
  Pcg32 rng(5);
  rl::build_policy_params(teacher.policy, rng, rl::kEnvStateDim, wcfg.dim, teacher.policy_cfg);
  teacher.budgets = {24, 24, 12};

  DistillConfig dcfg;
  dcfg.noise_sigma = 0.0;
  dcfg.steps = 1;
  dcfg.envs = 2;
  dcfg.student_privileged = true;  // identical inputs for the self-distillation check
  dcfg.sim = sim_cfg;
  auto result = distill(teacher, tasks, dcfg);
  CHECK(result.initial_loss < 1e-8);
  CHECK(result.student.tag == "student");
}

TEST_CASE("distillation: noise perturbs the student's view, not the teacher targets") {
  auto lib = gen::make_procedural_library(56, 4, 4);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  std::vector<gen::TaskInstance> tasks{
      gen::generate_scene(gen::Difficulty::Sparse, lib, 600, gcfg, sim_cfg)};

  rl::PolicyBundle teacher;
  wm::WMConfig wcfg;
  wcfg.patches_target = 2;
  wcfg.patches_obstacle = 2;
  wcfg.patches_ee = 1;
  wcfg.k = 6;
  wcfg.dim = 12;
  wcfg.blocks = 1;
  wcfg.heads = 2;
  teacher.encoder = wm::WorldModel<float>::init(wcfg, 3);
  teacher.encoder.stats.count = 1;
  teacher.encoder.stats.mean.setZero();
  teacher.encoder.stats.m2.setOnes();
  teacher.policy_cfg.fusion_hidden = {16, 8};
  Pcg32 rng(5);
  rl::build_policy_params(teacher.policy, rng, rl::kEnvStateDim, wcfg.dim, teacher.policy_cfg);
  teacher.budgets = {24, 24, 12};

  // with noise and identical nets, the initial loss is strictly positive:
  // the student sees different (perturbed) inputs than the teacher
  DistillConfig dcfg;
  dcfg.noise_sigma = 0.05;
  dcfg.steps = 1;
  dcfg.envs = 2;
  dcfg.student_privileged = true;
  dcfg.sim = sim_cfg;
  auto result = distill(teacher, tasks, dcfg);
  CHECK(result.initial_loss > 1e-8);

  // and the student without privileged channels also differs immediately
  DistillConfig dcfg2 = dcfg;
  dcfg2.noise_sigma = 0.0;
  dcfg2.student_privileged = false;
  auto result2 = distill(teacher, tasks, dcfg2);
  CHECK(result2.initial_loss > 1e-10);
  CHECK_FALSE(result2.student.privileged);
}

TEST_CASE("distillation rejects a non-privileged teacher") {
  rl::PolicyBundle bad_teacher;
  bad_teacher.privileged = false;
  DistillConfig dcfg;
  CHECK_THROWS_AS(distill(bad_teacher, {}, dcfg), std::invalid_argument);
}
