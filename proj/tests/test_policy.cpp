#include <doctest.h>

#include "pushdyn/gen/scenegen.hpp"
#include "pushdyn/rl/bundle.hpp"
#include "pushdyn/rl/eval.hpp"
#include "pushdyn/rl/ppo.hpp"

using namespace pushdyn;
using namespace pushdyn::rl;

namespace {

wm::WMConfig tiny_wm() {
  wm::WMConfig cfg;
  cfg.patches_target = 2;
  cfg.patches_obstacle = 2;
  cfg.patches_ee = 1;
  cfg.k = 6;
  cfg.dim = 12;
  cfg.blocks = 1;
  cfg.heads = 2;
  return cfg;
}

wm::WorldModel<float> tiny_encoder() {
  auto m = wm::WorldModel<float>::init(tiny_wm(), 9);
  m.stats.count = 1;
  m.stats.mean.setZero();
  m.stats.m2.setOnes();
  return m;
}

sim::SceneState two_body_scene() {
  sim::SceneState s;
  auto target = sim::RigidBody::make(ConvexPolygon::make_box(0.05, 0.04), 0.2, sim::BodyRole::Target);
  target.pose.p = {0.1, 0.0};
  s.bodies.push_back(target);
  auto obs = sim::RigidBody::make(ConvexPolygon::make_regular(6, 0.06), 0.8, sim::BodyRole::Obstacle);
  obs.pose.p = {-0.2, 0.25};
  s.bodies.push_back(obs);
  return s;
}

}  // namespace

TEST_CASE("reward closed forms match the stated constants") {
  CHECK(contact_reward(0.0, 0.1) == 1.0);
  CHECK(contact_reward(0.1, 0.1) == doctest::Approx(1.0 - std::tanh(1.0)).epsilon(1e-12));
  CHECK(contact_reward(0.1, 0.1) == doctest::Approx(0.238406).epsilon(1e-5));
  CHECK_FALSE(gate_open(0.2, 0.1));
  CHECK_FALSE(gate_open(0.1, 0.1));  // strict
  CHECK(gate_open(0.0999, 0.1));
  CHECK(combined_pose_error(0.1, 0.5, 5.0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(goal_reward(false, 0.01, 0.6) == 0.0);
  CHECK(success_scale(1.0) == 0.5);
  CHECK(success_scale(0.0) == 1.0);
  CHECK(success_scale(0.4) == doctest::Approx(0.8));
  // motion score clips each term into [0, 1]
  CHECK(motion_score(10.0, 10.0, 0.1, 0.5) == 1.0);
  CHECK(motion_score(0.0, 0.0, 0.1, 0.5) == 0.0);
  CHECK(motion_score(0.05, 0.0, 0.1, 0.5) == doctest::Approx(0.25));
}

TEST_CASE("total reward is the exact weighted sum with the configured weights") {
  RewardConfig cfg;
  CHECK(cfg.w_contact == 1.0);
  CHECK(cfg.w_goal == 5.0);
  CHECK(cfg.w_goal_fine == 16.0);
  CHECK(cfg.w_success == 2000.0);

  sim::SimConfig sim_cfg;
  sim::SceneState start = two_body_scene();
  sim::SceneState now = start;
  now.bodies[0].pose.p = {0.2, 0.1};
  Pose2 goal{{0.21, 0.1}, 0.0};

  auto rb = compute_reward(now, start, goal, cfg, sim_cfg);
  CHECK(rb.total == cfg.w_contact * rb.r_contact + cfg.w_goal * rb.r_goal +
                        cfg.w_goal_fine * rb.r_goal_fine + cfg.w_success * rb.r_success);
  CHECK(rb.r_contact >= 0.0);
  CHECK(rb.r_contact <= 1.0);
  CHECK(rb.r_goal >= 0.0);
  CHECK(rb.r_goal <= 1.0);
  CHECK(rb.r_goal_fine >= 0.0);
  CHECK(rb.r_goal_fine <= 1.0);
}

TEST_CASE("gate monotonicity and success scale bounds") {
  RewardConfig cfg;
  sim::SimConfig sim_cfg;
  sim::SceneState start = two_body_scene();

  // place the arm so the tip is touching the target: gate open
  sim::SceneState near = start;
  // tip at q=0 is at (0.35, 0); move the target body under it
  near.bodies[0].pose.p = {0.35 + 0.05 + 0.031, 0.0};
  sim::SceneState near_start = near;
  Pose2 goal{{0.5, 0.2}, 0.0};
  auto rb_near = compute_reward(near, near_start, goal, cfg, sim_cfg);
  CHECK(rb_near.gate);

  sim::SceneState far = near;
  far.bodies[0].pose.p = {0.35, 0.4};  // same pose error magnitude reachable only via gate
  auto rb_far = compute_reward(far, near_start, goal, cfg, sim_cfg);
  CHECK_FALSE(rb_far.gate);
  CHECK(rb_far.r_goal == 0.0);
  CHECK(rb_far.r_goal_fine == 0.0);

  // for a fixed pose error, opening the gate never decreases the total
  CHECK(rb_near.r_goal >= 0.0);
  const double closed_total = cfg.w_contact * rb_near.r_contact + cfg.w_success * rb_near.r_success;
  CHECK(rb_near.total >= closed_total);

  // r_success lives in {0} union [0.5, 1.0]
  CHECK(rb_near.r_success == 0.0);
  sim::SceneState at_goal = near;
  at_goal.bodies[0].pose.p = goal.p;
  at_goal.bodies[0].pose.theta = goal.theta;
  auto rb_succ = compute_reward(at_goal, near_start, goal, cfg, sim_cfg);
  CHECK(rb_succ.r_success >= 0.5);
  CHECK(rb_succ.r_success <= 1.0);
}

TEST_CASE("GAE matches the hand-computed recursion") {
  // r = 1,1,1; V = 0; gamma = 0.99; lambda = 0.95, terminal at the last step
  std::vector<double> r{1, 1, 1}, v{0, 0, 0}, tv{0, 0, 0};
  std::vector<bool> term{false, false, true}, trunc{false, false, false};
  auto adv = gae_advantages(r, v, term, trunc, tv, 0.0, 0.99, 0.95);
  const double a2 = 1.0;
  const double a1 = 1.0 + 0.99 * 0.95 * a2;
  const double a0 = 1.0 + 0.99 * 0.95 * a1;
  CHECK(adv[2] == doctest::Approx(a2).epsilon(1e-12));
  CHECK(adv[1] == doctest::Approx(a1).epsilon(1e-12));
  CHECK(adv[0] == doctest::Approx(a0).epsilon(1e-12));

  // truncation bootstraps the stored continuation value
  std::vector<bool> term2{false, false, false}, trunc2{false, false, true};
  std::vector<double> tv2{0, 0, 2.0};
  auto adv2 = gae_advantages(r, v, term2, trunc2, tv2, 0.0, 0.99, 0.95);
  CHECK(adv2[2] == doctest::Approx(1.0 + 0.99 * 2.0).epsilon(1e-12));
}

TEST_CASE("constant-reward one-step advantages normalize to zeros") {
  std::vector<double> r{0.7}, v{0.3}, tv{0};
  std::vector<bool> term{true}, trunc{false};
  std::vector<double> batch;
  for (int i = 0; i < 16; ++i)
    batch.push_back(gae_advantages(r, v, term, trunc, tv, 0, 0.99, 0.95)[0]);
  double mean = 0;
  for (double a : batch) mean += a;
  mean /= static_cast<double>(batch.size());
  double sq = 0;
  for (double a : batch) sq += (a - mean) * (a - mean);
  const double stdev = std::sqrt(sq / static_cast<double>(batch.size()));
  for (double a : batch) CHECK(std::abs((a - mean) / (stdev + 1e-8)) < 1e-6);
}

TEST_CASE("ratio of one makes the clipped surrogate equal the advantage mean") {
  Pcg32 rng(5);
  ad::Tape<float> t;
  ad::Tensor<float> adv({8});
  for (int i = 0; i < 8; ++i) adv.data[i] = static_cast<float>(rng.normal());
  ad::Var ratio = t.constant(ad::Tensor<float>::ones({8}));
  ad::Var a = t.constant(adv);
  ad::Var surr1 = ad::mul(t, ratio, a);
  ad::Var surr2 = ad::mul(t, ad::clip(t, ratio, 0.7f, 1.3f), a);
  ad::Var msurr = ad::mul_scalar(
      t, ad::sub(t, ad::add(t, surr1, surr2), ad::abs(t, ad::sub(t, surr1, surr2))), 0.5f);
  ad::Var loss = ad::neg(t, ad::mean_all(t, msurr));
  CHECK(t.val(loss).item() == doctest::Approx(-adv.data.mean()).epsilon(1e-6));
}

TEST_CASE("clipped ratio contributes zero gradient when the clip branch is active") {
  auto grad_for = [](float advantage, float ratio_target) {
    ad::ParamTree<float> tree;
    tree.create("mean", ad::Tensor<float>::zeros({1, 3}));
    tree.create("log_std", ad::Tensor<float>::zeros({3}));
    ad::Tape<float> t;
    ad::Var mean = t.param(tree.at("mean"));
    ad::Var log_std = t.param(tree.at("log_std"));
    ad::Tensor<float> act_t({1, 3});
    act_t.data[0] = 0.1f;
    act_t.data[1] = -0.2f;
    act_t.data[2] = 0.3f;  // action away from the mean so dlogp/dmean != 0
    ad::Var act = t.constant(act_t);
    ad::Var logp = gaussian_log_prob(t, mean, log_std, act);
    // choose old_logp so the ratio equals ratio_target at the current params
    ad::Tensor<float> old_lp({1});
    old_lp.data[0] = t.val(logp).data[0] - std::log(ratio_target);
    ad::Var ratio = ad::exp(t, ad::sub(t, logp, t.constant(old_lp)));
    ad::Var a = t.constant(ad::Tensor<float>::full({1}, advantage));
    ad::Var surr1 = ad::mul(t, ratio, a);
    ad::Var surr2 = ad::mul(t, ad::clip(t, ratio, 0.7f, 1.3f), a);
    ad::Var msurr = ad::mul_scalar(
        t, ad::sub(t, ad::add(t, surr1, surr2), ad::abs(t, ad::sub(t, surr1, surr2))), 0.5f);
    t.backward(ad::neg(t, ad::mean_all(t, msurr)));
    return double(tree.at("mean").grad.data.abs().maxCoeff());
  };
  // positive advantage, ratio far above 1 + eps: clipped -> zero gradient
  CHECK(grad_for(1.0f, 2.0f) == 0.0);
  // negative advantage, same ratio: unclipped branch is the minimum -> lives
  CHECK(grad_for(-1.0f, 2.0f) > 0.0);
}

TEST_CASE("env state layout: at-goal encoding, privileged zeros") {
  sim::SimConfig sim_cfg;
  sim::SceneState s = two_body_scene();
  Pose2 goal = s.bodies[0].pose;  // object already at the goal
  auto v = build_env_state(s, goal, Eigen::Vector3d::Zero(), true, sim_cfg);
  REQUIRE(v.size() == kEnvStateDim);
  CHECK(v[10] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v[11] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v[12] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v[13] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v[14] == doctest::Approx(0.2));  // privileged mass

  auto blind = build_env_state(s, goal, Eigen::Vector3d::Zero(), false, sim_cfg);
  for (int i = 14; i < 19; ++i) CHECK(blind[i] == 0.0);
}

TEST_CASE("frozen encoder gives identical tokens for identical states") {
  auto enc = tiny_encoder();
  sim::SimConfig sim_cfg;
  sim::SceneState s = two_body_scene();
  sim::CloudBudgets budgets{24, 24, 12};
  sim::SceneCloudRenderer renderer(s, budgets, sim_cfg, 5);
  wm::ChannelMask no_mask;
  auto o1 = build_scene_obs(s, renderer, enc.cfg, no_mask, 3);
  auto o2 = build_scene_obs(s, renderer, enc.cfg, no_mask, 3);
  ad::Tape<float> t1, t2;
  std::vector<const wm::TokenBatch*> b1{&o1.tokens}, b2{&o2.tokens};
  CHECK((t1.val(enc.encode(t1, b1)).data == t2.val(enc.encode(t2, b2)).data).all());
}

TEST_CASE("policy forward: shapes, zero value head, fusion gradient flows") {
  auto enc = tiny_encoder();
  Pcg32 rng(7);
  ad::ParamTree<float> tree;
  PolicyConfig pcfg;
  pcfg.fusion_hidden = {16, 8};
  build_policy_params(tree, rng, kEnvStateDim, enc.cfg.dim, pcfg);
  CHECK(tree.at("log_std").value.data[0] == doctest::Approx(std::log(0.5)));

  ad::Tape<float> t;
  ad::Tensor<float> obs({2, kEnvStateDim});
  for (Eigen::Index i = 0; i < obs.numel(); ++i) obs.data[i] = float(rng.normal());
  ad::Tensor<float> tokens({2, enc.cfg.total_patches(), enc.cfg.dim});
  for (Eigen::Index i = 0; i < tokens.numel(); ++i) tokens.data[i] = float(rng.normal());
  PolicyOut po = policy_forward(t, tree, t.constant(obs), t.constant(tokens), pcfg);
  CHECK(t.val(po.mean).shape == std::vector<int>{2, 3});
  CHECK(t.val(po.value).shape == std::vector<int>{2, 1});

  // actor loss gradient reaches the fusion parameters
  t.backward(ad::mean_all(t, ad::square(t, po.mean)));
  CHECK(double(tree.at("fusion/l0/w").grad.data.abs().maxCoeff()) > 0.0);

  // zero critic head -> zero value
  for (auto& [name, p] : tree.params)
    if (name.rfind("critic", 0) == 0) p.value.data.setZero();
  ad::Tape<float> t2;
  PolicyOut po2 = policy_forward(t2, tree, t2.constant(obs), t2.constant(tokens), pcfg);
  CHECK(t2.val(po2.value).data.abs().maxCoeff() == 0.0f);
}

TEST_CASE("ppo_train smoke run keeps the frozen encoder bit-identical") {
  auto lib = gen::make_procedural_library(77, 4, 4);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  std::vector<gen::TaskInstance> tasks;
  for (int i = 0; i < 2; ++i)
    tasks.push_back(gen::generate_scene(gen::Difficulty::Sparse, lib, 100 + i, gcfg, sim_cfg));

  auto enc = tiny_encoder();
  const auto enc_before = enc.params;

  PpoOptions opt;
  opt.ppo.envs = 4;
  opt.ppo.horizon = 8;
  opt.ppo.epochs = 2;
  opt.ppo.minibatches = 2;
  opt.iterations = 2;
  opt.budgets = {24, 24, 12};
  opt.sim = sim_cfg;
  opt.policy.fusion_hidden = {16, 8};
  opt.seed = 11;
  auto result = ppo_train(tasks, enc, opt);

  CHECK(result.iterations_run == 2);
  CHECK(result.curve.size() == 2);
  for (const auto& [name, p] : enc_before.params)
    CHECK((result.encoder.params.at(name).value.data == p.value.data).all());
  CHECK(result.outcomes.episodes ==
        result.outcomes.successes + result.outcomes.drops + result.outcomes.timeouts);
}

TEST_CASE("ppo_train is deterministic for a fixed seed") {
  auto lib = gen::make_procedural_library(78, 4, 4);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  std::vector<gen::TaskInstance> tasks{
      gen::generate_scene(gen::Difficulty::Sparse, lib, 200, gcfg, sim_cfg)};
  auto enc = tiny_encoder();

  PpoOptions opt;
  opt.ppo.envs = 2;
  opt.ppo.horizon = 6;
  opt.ppo.epochs = 1;
  opt.ppo.minibatches = 1;
  opt.iterations = 2;
  opt.budgets = {24, 24, 12};
  opt.sim = sim_cfg;
  opt.policy.fusion_hidden = {8};
  opt.seed = 21;
  auto r1 = ppo_train(tasks, enc, opt);
  auto r2 = ppo_train(tasks, enc, opt);
  for (const auto& [name, p] : r1.policy_params.params)
    CHECK((r2.policy_params.at(name).value.data == p.value.data).all());
  CHECK(r1.curve.back().mean_reward == r2.curve.back().mean_reward);
}

TEST_CASE("evaluate: idle policy scores zero success and zero offset") {
  auto lib = gen::make_procedural_library(79, 4, 4);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  std::vector<gen::TaskInstance> tasks{
      gen::generate_scene(gen::Difficulty::Sparse, lib, 300, gcfg, sim_cfg)};

  PolicyBundle bundle;
  bundle.encoder = tiny_encoder();
  bundle.policy_cfg.fusion_hidden = {8};
  Pcg32 rng(31);
  build_policy_params(bundle.policy, rng, kEnvStateDim, bundle.encoder.cfg.dim, bundle.policy_cfg);
  for (auto& [name, p] : bundle.policy.params)
    if (name.rfind("actor", 0) == 0) p.value.data.setZero();
  bundle.budgets = {24, 24, 12};

  EvalOptions opt;
  opt.sim = sim_cfg;
  opt.episode_cap = 10;
  auto report = evaluate_track(bundle, tasks, gen::Difficulty::Sparse, opt);
  CHECK(report.success_rate_pct == 0.0);
  CHECK(report.mean_offset_cm == 0.0);
  CHECK(report.episodes == 1);
}

TEST_CASE("evaluate: a task already at its goal counts as success immediately") {
  auto lib = gen::make_procedural_library(80, 4, 4);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  auto task = gen::generate_scene(gen::Difficulty::Sparse, lib, 400, gcfg, sim_cfg);
  // oracle hook: set the goal to the target's current pose
  task.goal = task.scene.bodies[static_cast<std::size_t>(task.target_body)].pose;
  task.goal_candidates = {task.goal};

  PolicyBundle bundle;
  bundle.encoder = tiny_encoder();
  bundle.policy_cfg.fusion_hidden = {8};
  Pcg32 rng(33);
  build_policy_params(bundle.policy, rng, kEnvStateDim, bundle.encoder.cfg.dim, bundle.policy_cfg);
  for (auto& [name, p] : bundle.policy.params)
    if (name.rfind("actor", 0) == 0) p.value.data.setZero();
  bundle.budgets = {24, 24, 12};

  EvalOptions opt;
  opt.sim = sim_cfg;
  opt.episode_cap = 10;
  auto report = evaluate_track(bundle, {task}, gen::Difficulty::Sparse, opt);
  CHECK(report.success_rate_pct == 100.0);
}

TEST_CASE("policy bundle round trip preserves parameters and configs") {
  PolicyBundle bundle;
  bundle.encoder = tiny_encoder();
  bundle.policy_cfg.fusion_hidden = {16, 8};
  Pcg32 rng(41);
  build_policy_params(bundle.policy, rng, kEnvStateDim, bundle.encoder.cfg.dim, bundle.policy_cfg);
  bundle.reward_cfg.d_max = 0.123;
  bundle.ppo_cfg.lr = 7e-5;
  bundle.privileged = false;
  bundle.wm_parent_hash = "abc123";

  auto back = PolicyBundle::from_checkpoint(bundle.to_checkpoint());
  CHECK(back.reward_cfg.d_max == 0.123);
  CHECK(back.ppo_cfg.lr == 7e-5);
  CHECK_FALSE(back.privileged);
  CHECK(back.wm_parent_hash == "abc123");
  CHECK(back.policy_cfg.fusion_hidden == std::vector<int>{16, 8});
  for (const auto& [name, p] : bundle.policy.params)
    CHECK((back.policy.at(name).value.data == p.value.data).all());
  for (const auto& [name, p] : bundle.encoder.params.params)
    CHECK((back.encoder.params.at(name).value.data == p.value.data).all());
}
