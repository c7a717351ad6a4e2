#include "pushdyn/cur/curriculum.hpp"

#include <filesystem>
#include <json.hpp>

#include "pushdyn/binio.hpp"

namespace pushdyn::cur {

namespace fs = std::filesystem;

DatasetManifest collect_rollouts(const rl::PolicyBundle& policy,
                                 const std::vector<gen::TaskInstance>& tasks, long step_budget,
                                 const std::string& out_dir, const CollectOptions& opt) {
  if (step_budget <= 0) throw std::invalid_argument("collect_rollouts: budget must be positive");
  if (tasks.empty()) throw std::invalid_argument("collect_rollouts: no tasks");
  fs::create_directories(out_dir);

  DatasetManifest manifest;
  Pcg32 noise(derive_seed(opt.seed, 0xc011u));
  const std::uint64_t tok_seed = derive_seed(opt.seed, 0x70c0u);
  wm::ChannelMask no_mask;
  std::size_t cursor = 0;
  int episode_id = 0;

  while (manifest.total_steps < step_budget) {
    const gen::TaskInstance& task = tasks[cursor % tasks.size()];
    cursor += 1;

    EpisodeRecord ep;
    ep.task = task;
    ep.budgets = opt.budgets;
    ep.sim = opt.sim;
    const auto& cands = task.goal_candidates.empty() ? std::vector<Pose2>{task.goal}
                                                     : task.goal_candidates;
    ep.goal = cands[static_cast<std::size_t>(episode_id) % cands.size()];

    sim::SceneState scene = task.scene;
    const sim::SceneState episode_start = scene;
    sim::SceneCloudRenderer renderer(scene, opt.budgets, opt.sim, task.seed);
    Eigen::Vector3d prev_action = Eigen::Vector3d::Zero();
    const int sym = policy.reward_cfg.symmetry_aware
                        ? scene.bodies[static_cast<std::size_t>(scene.target_index())].symmetry_order
                        : 1;

    std::string outcome = "timeout";
    for (int t = 0; t < opt.episode_cap; ++t) {
      EpisodeStep st;
      st.snapshot = scene;
      st.cloud = renderer.render(scene, &st.sources);

      // policy forward (stochastic)
      PhysPointCloud masked = st.cloud;
      wm::TokenBatch tb = wm::tokenize(masked, policy.encoder.cfg, tok_seed);
      std::vector<const wm::TokenBatch*> ptrs{&tb};
      ad::Tape<float> enc_tape;
      ad::Tensor<float> tokens = enc_tape.val(policy.encoder.encode(enc_tape, ptrs));
      const Eigen::VectorXd ob =
          rl::build_env_state(scene, ep.goal, prev_action, policy.privileged, opt.sim);
      ad::Tensor<float> obs({1, rl::kEnvStateDim});
      for (int d = 0; d < rl::kEnvStateDim; ++d) obs.data[d] = static_cast<float>(ob[d]);
      ad::Tape<float> tape;
      rl::PolicyOut po = rl::policy_forward(tape, const_cast<ad::ParamTree<float>&>(policy.policy),
                                            tape.constant(obs), tape.constant(tokens),
                                            policy.policy_cfg);
      Eigen::Vector3d action;
      for (int d = 0; d < 3; ++d) {
        const double mean = tape.val(po.mean).data[d];
        const double sigma = std::exp(tape.val(po.log_std).data[d]);
        action[d] = mean + sigma * noise.normal();
      }
      const double scale = std::min(opt.action_scale, opt.sim.action_bound);
      action = scale * action.cwiseMax(-1.0).cwiseMin(1.0);
      st.action = action;

      const Pose2 ee_before = scene.ee_pose(opt.sim);
      scene = sim::step(scene, action, opt.sim).state;
      const Pose2 ee_after = scene.ee_pose(opt.sim);
      st.ee_flow << ee_after.p.x() - ee_before.p.x(), ee_after.p.y() - ee_before.p.y(),
          wrap_angle(ee_after.theta - ee_before.theta);
      st.reward = rl::compute_reward(scene, episode_start, ep.goal, policy.reward_cfg, opt.sim);
      prev_action = action;
      ep.steps.push_back(std::move(st));

      if (st.reward.r_success > 0.0 || sim::check_success(scene, ep.goal, policy.reward_cfg.tau_p,
                                                          policy.reward_cfg.tau_r, sym)) {
        outcome = "success";
        break;
      }
      bool dropped = false;
      for (const auto& b : scene.bodies) dropped = dropped || b.dropped;
      if (dropped) {
        outcome = "drop";
        break;
      }
    }
    ep.outcome = outcome;
    ep.final_snapshot = scene;
    ep.final_cloud = renderer.render(scene, &ep.final_sources);

    char name[64];
    std::snprintf(name, sizeof(name), "episode_%05d.epr", episode_id);
    const std::string rel = name;
    save_episode(ep, (fs::path(out_dir) / rel).string());
    manifest.files.push_back(rel);
    manifest.hashes.push_back(file_fnv1a64((fs::path(out_dir) / rel).string()));
    manifest.total_steps += ep.step_count();
    episode_id += 1;
  }

  save_dataset_manifest(manifest, (fs::path(out_dir) / "dataset.json").string());
  return manifest;
}

std::vector<wm::WmSample> load_samples(const std::string& dataset_dir, const DatasetManifest& m) {
  std::vector<wm::WmSample> out;
  for (const auto& rel : m.files) {
    const EpisodeRecord ep = load_episode((fs::path(dataset_dir) / rel).string());
    auto samples = episode_to_samples(ep);
    out.insert(out.end(), std::make_move_iterator(samples.begin()),
               std::make_move_iterator(samples.end()));
  }
  return out;
}

void save_curriculum_state(const CurriculumState& s, const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["bootstrap_reached_threshold"] = s.bootstrap_reached_threshold;
  j["converged"] = s.converged;
  j["completed_stages"] = s.completed_stages;
  j["rounds"] = nlohmann::json::array();
  for (const auto& r : s.rounds) {
    nlohmann::json jr;
    jr["round"] = r.round;
    jr["success_rate_pct"] = r.success_rate_pct;
    jr["wm_heldout_cm"] = r.wm_heldout_cm;
    jr["wm_hash"] = r.wm_hash;
    jr["policy_hash"] = r.policy_hash;
    jr["wm_parent_hash"] = r.wm_parent_hash;
    j["rounds"].push_back(jr);
  }
  write_text_file(path, j.dump(2));
}

CurriculumState load_curriculum_state(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  CurriculumState s;
  s.bootstrap_reached_threshold = j.at("bootstrap_reached_threshold").get<bool>();
  s.converged = j.at("converged").get<bool>();
  s.completed_stages = j.at("completed_stages").get<std::vector<std::string>>();
  for (const auto& jr : j.at("rounds")) {
    RoundMetrics r;
    r.round = jr.at("round").get<int>();
    r.success_rate_pct = jr.at("success_rate_pct").get<double>();
    r.wm_heldout_cm = jr.at("wm_heldout_cm").get<double>();
    r.wm_hash = jr.at("wm_hash").get<std::string>();
    r.policy_hash = jr.at("policy_hash").get<std::string>();
    r.wm_parent_hash = jr.at("wm_parent_hash").get<std::string>();
    s.rounds.push_back(r);
  }
  return s;
}

namespace {

rl::PolicyBundle make_bundle(const rl::PpoResult& result, const rl::PpoOptions& opt,
                             bool no_pretrain, const std::string& parent_hash) {
  rl::PolicyBundle b;
  b.policy_cfg = result.policy_cfg;
  b.reward_cfg = opt.reward;
  b.ppo_cfg = opt.ppo;
  b.schedule = opt.schedule;
  b.budgets = opt.budgets;
  b.privileged = opt.privileged;
  b.no_pretrain = no_pretrain;
  b.encoder = result.encoder;
  b.policy = result.policy_params;
  b.wm_parent_hash = parent_hash;
  return b;
}

}  // namespace

CurriculumState run_curriculum(const std::vector<gen::TaskInstance>& train_tasks,
                               const std::vector<gen::TaskInstance>& eval_tasks,
                               const CurriculumConfig& cfg, const std::string& out_dir,
                               std::uint64_t seed) {
  if (cfg.rounds < 1) throw std::invalid_argument("run_curriculum: rounds must be >= 1");
  fs::create_directories(out_dir);
  const std::string state_path = (fs::path(out_dir) / "curriculum_state.json").string();

  CurriculumState state;
  if (fs::exists(state_path)) state = load_curriculum_state(state_path);

  auto persist = [&](const std::string& stage) {
    state.completed_stages.push_back(stage);
    save_curriculum_state(state, state_path);
  };

  // --- bootstrap: policy from scratch, encoder trained jointly -------------
  const std::string bootstrap_path = (fs::path(out_dir) / "policy_bootstrap.ck").string();
  if (!state.stage_done("bootstrap")) {
    rl::PpoOptions opt = cfg.ppo;
    opt.no_pretrain = true;
    opt.iterations = cfg.bootstrap_iterations;
    opt.stop_success_rate = cfg.bootstrap_threshold_pct;
    opt.seed = derive_seed(seed, 0xb007u);
    auto wm0 = wm::WorldModel<float>::init(cfg.wm, derive_seed(seed, 0x3340u));
    // joint training still needs usable input statistics
    for (const auto& task : train_tasks) {
      sim::SceneCloudRenderer r(task.scene, opt.budgets, opt.sim, task.seed);
      wm0.stats = update_running_stats(wm0.stats, r.render(task.scene));
    }
    auto result = rl::ppo_train(train_tasks, wm0, opt);
    state.bootstrap_reached_threshold =
        result.curve.empty() ? false
                             : result.curve.back().success_rate >= cfg.bootstrap_threshold_pct;
    make_bundle(result, opt, true, "").save(bootstrap_path);
    persist("bootstrap");
  }

  rl::PolicyBundle current_policy = rl::PolicyBundle::load(bootstrap_path);
  std::optional<wm::WorldModel<float>> current_wm;
  std::string current_wm_hash;
  std::vector<wm::WmSample> heldout;
  std::vector<std::string> old_datasets;

  for (int round = 0; round < cfg.rounds; ++round) {
    const std::string rtag = "round" + std::to_string(round);
    const std::string data_dir = (fs::path(out_dir) / (rtag + "_data")).string();
    const std::string wm_path = (fs::path(out_dir) / (rtag + "_wm.ck")).string();
    const std::string policy_path = (fs::path(out_dir) / (rtag + "_policy.ck")).string();

    // 1. collect rollouts with the current policy
    if (!state.stage_done(rtag + "/collect")) {
      CollectOptions copt;
      copt.sim = cfg.ppo.sim;
      copt.budgets = cfg.ppo.budgets;
      copt.episode_cap = cfg.ppo.ppo.episode_cap;
      copt.seed = derive_seed(seed, 0xc0deu, static_cast<std::uint64_t>(round));
      collect_rollouts(current_policy, train_tasks, cfg.collect_steps, data_dir, copt);
      persist(rtag + "/collect");
    }
    DatasetManifest data = load_dataset_manifest((fs::path(data_dir) / "dataset.json").string());

    // the fixed held-out rollouts come from the first round's first episodes
    std::vector<wm::WmSample> new_samples;
    {
      DatasetManifest train_part = data;
      if (round == 0) {
        DatasetManifest held_part;
        const int h = std::min<int>(cfg.heldout_episodes, static_cast<int>(data.files.size()) / 2);
        held_part.files.assign(data.files.begin(), data.files.begin() + h);
        train_part.files.erase(train_part.files.begin(), train_part.files.begin() + h);
        heldout = load_samples(data_dir, held_part);
      }
      new_samples = load_samples(data_dir, train_part);
    }
    if (round == 0 && heldout.empty()) heldout = new_samples;  // degenerate tiny runs

    // replay mix from earlier rounds
    std::vector<wm::WmSample> samples = std::move(new_samples);
    for (const auto& old_dir : old_datasets) {
      DatasetManifest old_m = load_dataset_manifest((fs::path(old_dir) / "dataset.json").string());
      auto old_samples = load_samples(old_dir, old_m);
      const std::size_t stride = static_cast<std::size_t>(
          std::max(1l, std::lround(1.0 / std::max(cfg.replay_fraction, 1e-9))));
      for (std::size_t i = 0; i < old_samples.size(); i += stride)
        samples.push_back(old_samples[i]);
    }
    old_datasets.push_back(data_dir);

    // 2. world-model update (warm started after round 0)
    if (!state.stage_done(rtag + "/wm")) {
      wm::WmTrainConfig tc = cfg.wm_train;
      tc.epochs = cfg.wm_epochs;
      tc.seed = derive_seed(seed, 0x3370u, static_cast<std::uint64_t>(round));
      const wm::WorldModel<float>* warm = current_wm ? &*current_wm : nullptr;
      auto trained = wm::train_world_model(samples, cfg.wm, tc, warm);
      trained.model.to_checkpoint().save(wm_path);
      persist(rtag + "/wm");
    }
    {
      auto ck = ad::Checkpoint::load(wm_path);
      const std::string parent = current_wm_hash;
      current_wm = wm::WorldModel<float>::from_checkpoint(ck);
      current_wm_hash = hex64(ck.content_hash());

      RoundMetrics rm;
      rm.round = round;
      rm.wm_hash = current_wm_hash;
      rm.wm_parent_hash = parent;
      rm.wm_heldout_cm = wm::heldout_chamfer_cm(*current_wm, heldout, cfg.wm_train.mask,
                                                derive_seed(seed, 0x70c0u));
      if (static_cast<int>(state.rounds.size()) <= round)
        state.rounds.push_back(rm);
      else {
        state.rounds[static_cast<std::size_t>(round)].wm_hash = rm.wm_hash;
        state.rounds[static_cast<std::size_t>(round)].wm_parent_hash = rm.wm_parent_hash;
        state.rounds[static_cast<std::size_t>(round)].wm_heldout_cm = rm.wm_heldout_cm;
      }
      save_curriculum_state(state, state_path);
    }

    // 3. PPO on the refreshed frozen encoder (policy warm start, fresh optimizer)
    if (!state.stage_done(rtag + "/policy")) {
      rl::PpoOptions opt = cfg.ppo;
      opt.no_pretrain = false;
      opt.iterations = cfg.ppo_iterations;
      opt.seed = derive_seed(seed, 0x9010u, static_cast<std::uint64_t>(round));
      opt.init_policy = current_policy.policy;
      auto result = rl::ppo_train(train_tasks, *current_wm, opt);
      rl::PolicyBundle bundle = make_bundle(result, opt, false, current_wm_hash);
      bundle.save(policy_path);
      persist(rtag + "/policy");
    }
    current_policy = rl::PolicyBundle::load(policy_path);
    state.rounds[static_cast<std::size_t>(round)].policy_hash =
        hex64(ad::Checkpoint::load(policy_path).content_hash());

    // 4. quick evaluation
    if (!state.stage_done(rtag + "/eval")) {
      rl::EvalOptions eopt;
      eopt.sim = cfg.ppo.sim;
      eopt.episode_cap = cfg.ppo.ppo.episode_cap;
      eopt.goals_per_scene = cfg.eval_goals_per_scene;
      eopt.seed = derive_seed(seed, 0xe7a1u, static_cast<std::uint64_t>(round));
      std::vector<gen::TaskInstance> subset(
          eval_tasks.begin(),
          eval_tasks.begin() + std::min<std::size_t>(eval_tasks.size(),
                                                     static_cast<std::size_t>(cfg.eval_scenes)));
      auto report = rl::evaluate_track(current_policy, subset, gen::Difficulty::Sparse, eopt);
      state.rounds[static_cast<std::size_t>(round)].success_rate_pct = report.success_rate_pct;
      persist(rtag + "/eval");
    }

    // convergence: both deltas small across consecutive rounds
    if (round >= 1) {
      const auto& prev = state.rounds[static_cast<std::size_t>(round - 1)];
      const auto& cur = state.rounds[static_cast<std::size_t>(round)];
      const bool success_flat =
          std::abs(cur.success_rate_pct - prev.success_rate_pct) < cfg.stop_success_delta_pct;
      const bool wm_flat =
          std::abs(cur.wm_heldout_cm - prev.wm_heldout_cm) <
          cfg.stop_wm_delta_frac * std::max(1e-9, prev.wm_heldout_cm);
      if (success_flat && wm_flat) {
        state.converged = true;
        save_curriculum_state(state, state_path);
        break;
      }
    }
  }
  save_curriculum_state(state, state_path);
  return state;
}

}  // namespace pushdyn::cur
