#include "pushdyn/deploy/distill.hpp"

namespace pushdyn::deploy {

namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

// Noise on observed coordinates and velocities; the planar channels z and vz
// stay exactly zero so the layout contract holds.
PhysPointCloud perturb_cloud(const PhysPointCloud& cloud, double sigma, Pcg32& rng) {
  PhysPointCloud out = cloud;
  for (int i = 0; i < out.size(); ++i) {
    out.feats(i, 0) += sigma * rng.normal();
    out.feats(i, 1) += sigma * rng.normal();
    out.feats(i, 4) += sigma * rng.normal();
    out.feats(i, 5) += sigma * rng.normal();
  }
  return out;
}

struct Slot {
  sim::SceneState scene;
  Pose2 goal;
  std::shared_ptr<sim::SceneCloudRenderer> renderer;
  Eigen::Vector3d prev_action = Eigen::Vector3d::Zero();
  int steps = 0;
};

}  // namespace

DistillResult distill(const rl::PolicyBundle& teacher,
                      const std::vector<gen::TaskInstance>& tasks, const DistillConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("distill: no tasks");
  if (!teacher.privileged)
    throw std::invalid_argument("distill: teacher must be trained with privileged channels");

  DistillResult result;
  rl::PolicyBundle& student = result.student;
  student = teacher;  // same architecture and configs
  student.privileged = cfg.student_privileged;
  student.tag = "student";
  if (!cfg.init_from_teacher) {
    Pcg32 init_rng(derive_seed(cfg.seed, 0x57dcu));
    student.policy = {};
    rl::build_policy_params(student.policy, init_rng, rl::kEnvStateDim, student.encoder.cfg.dim,
                            student.policy_cfg);
  }

  Pcg32 noise(derive_seed(cfg.seed, 0xd157u));
  Pcg32 action_noise(derive_seed(cfg.seed, 0xd158u));
  const std::uint64_t tok_seed = derive_seed(cfg.seed, 0x70c0u);

  std::vector<Slot> slots(static_cast<std::size_t>(cfg.envs));
  std::size_t cursor = 0;
  auto reset_slot = [&](Slot& s) {
    const gen::TaskInstance& task = tasks[cursor % tasks.size()];
    cursor += 1;
    s.scene = task.scene;
    s.goal = task.goal;
    s.renderer = std::make_shared<sim::SceneCloudRenderer>(s.scene, teacher.budgets, cfg.sim,
                                                           task.seed);
    s.prev_action.setZero();
    s.steps = 0;
  };
  for (auto& s : slots) reset_slot(s);

  ad::AdamState<float> adam_policy, adam_wm;
  ad::AdamConfig<float> acfg;
  acfg.lr = static_cast<float>(cfg.lr);

  const int P = teacher.encoder.cfg.total_patches();
  const int D = teacher.encoder.cfg.dim;

  for (int step = 0; step < cfg.steps; ++step) {
    // one batch: every env advanced by the teacher, one sample per env
    const int B = cfg.envs;
    std::vector<wm::TokenBatch> clean_tb(static_cast<std::size_t>(B));
    std::vector<wm::TokenBatch> noisy_tb(static_cast<std::size_t>(B));
    Tensor<float> teacher_obs({B, rl::kEnvStateDim}), student_obs({B, rl::kEnvStateDim});

    for (int e = 0; e < B; ++e) {
      Slot& s = slots[static_cast<std::size_t>(e)];
      const PhysPointCloud clean = s.renderer->render(s.scene);
      const PhysPointCloud noisy = perturb_cloud(clean, cfg.noise_sigma, noise);
      clean_tb[static_cast<std::size_t>(e)] = wm::tokenize(clean, teacher.encoder.cfg, tok_seed);
      noisy_tb[static_cast<std::size_t>(e)] = wm::tokenize(noisy, teacher.encoder.cfg, tok_seed);

      const Eigen::VectorXd tob = rl::build_env_state(s.scene, s.goal, s.prev_action, true, cfg.sim);
      const Eigen::VectorXd sob =
          rl::build_env_state(s.scene, s.goal, s.prev_action, cfg.student_privileged, cfg.sim);
      for (int d = 0; d < rl::kEnvStateDim; ++d) {
        teacher_obs.data[e * rl::kEnvStateDim + d] = static_cast<float>(tob[d]);
        student_obs.data[e * rl::kEnvStateDim + d] = static_cast<float>(sob[d]);
      }
    }

    // teacher targets from clean observations
    Tensor<float> target_mean({B, 3});
    Tensor<float> target_fused;
    {
      std::vector<const wm::TokenBatch*> ptrs;
      for (const auto& tb : clean_tb) ptrs.push_back(&tb);
      Tape<float> enc_tape;
      Tensor<float> tokens = enc_tape.val(teacher.encoder.encode(enc_tape, ptrs));
      Tape<float> tape;
      rl::PolicyOut po =
          rl::policy_forward(tape, const_cast<ad::ParamTree<float>&>(teacher.policy),
                             tape.constant(teacher_obs), tape.constant(tokens), teacher.policy_cfg);
      target_mean = tape.val(po.mean);
      target_fused = tape.val(po.fused);
    }

    // student forward on perturbed observations, gradients into both halves
    {
      std::vector<const wm::TokenBatch*> ptrs;
      for (const auto& tb : noisy_tb) ptrs.push_back(&tb);
      Tape<float> tape;
      Var tokens = student.encoder.encode_with(tape, student.encoder.params, ptrs);
      if (tape.val(tokens).shape != std::vector<int>{B, P, D})
        throw std::logic_error("distill: unexpected token shape");
      rl::PolicyOut po = rl::policy_forward(tape, student.policy, tape.constant(student_obs),
                                            tokens, student.policy_cfg);
      Var loss = ad::add(
          tape, ad::mean_all(tape, ad::square(tape, ad::sub(tape, po.mean, tape.constant(target_mean)))),
          ad::mean_all(tape, ad::square(tape, ad::sub(tape, po.fused, tape.constant(target_fused)))));
      const double loss_val = double(tape.val(loss).item());
      if (step == 0) result.initial_loss = loss_val;
      result.losses.push_back(loss_val);

      student.policy.zero_grads();
      student.encoder.params.zero_grads();
      tape.backward(loss);
      ad::adam_step(student.policy, adam_policy, acfg);
      ad::adam_step(student.encoder.params, adam_wm, acfg);
    }

    // advance the environments with the teacher's stochastic action
    for (int e = 0; e < B; ++e) {
      Slot& s = slots[static_cast<std::size_t>(e)];
      Eigen::Vector3d act;
      for (int d = 0; d < 3; ++d) {
        const float mean = target_mean.data[e * 3 + d];
        const float sigma = std::exp(teacher.policy.at("log_std").value.data[d]);
        act[d] = double(mean) + double(sigma) * action_noise.normal();
      }
      const double scale = std::min(cfg.action_scale, cfg.sim.action_bound);
      act = scale * act.cwiseMax(-1.0).cwiseMin(1.0);
      s.scene = sim::step(s.scene, act, cfg.sim).state;
      s.prev_action = act;
      s.steps += 1;
      bool done = s.steps >= cfg.rollout_horizon;
      for (const auto& b : s.scene.bodies) done = done || b.dropped;
      if (sim::check_success(s.scene, s.goal, teacher.reward_cfg.tau_p, teacher.reward_cfg.tau_r))
        done = true;
      if (done) reset_slot(s);
    }
  }

  result.final_loss = result.losses.empty() ? 0.0 : result.losses.back();
  return result;
}

}  // namespace pushdyn::deploy
