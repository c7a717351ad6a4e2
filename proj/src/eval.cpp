#include "pushdyn/rl/eval.hpp"

#include <thread>

#include "pushdyn/chamfer.hpp"
#include "pushdyn/sampling.hpp"

namespace pushdyn::rl {

namespace {

double obstacle_offset_cm(const sim::SceneState& a, const sim::SceneState& b, std::uint64_t seed,
                          int pts_per_body = 64) {
  const int ti = a.target_index();
  std::vector<Eigen::Vector2d> pa, pb;
  for (std::size_t i = 0; i < a.bodies.size(); ++i) {
    if (static_cast<int>(i) == ti) continue;
    const auto canon = sample_body_points(a.bodies[i].shape, pts_per_body, 1.0,
                                          derive_seed(seed, 0x0f5ecu, i));
    for (int p = 0; p < canon.size(); ++p) {
      const Eigen::Vector2d local(canon.positions()(p, 0), canon.positions()(p, 1));
      pa.push_back(a.bodies[i].pose.apply(local));
      pb.push_back(b.bodies[i].pose.apply(local));
    }
  }
  if (pa.empty()) return 0.0;
  Eigen::MatrixX3d ma(static_cast<int>(pa.size()), 3), mb(static_cast<int>(pb.size()), 3);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ma.row(static_cast<int>(i)) << pa[i].x(), pa[i].y(), 0.0;
    mb.row(static_cast<int>(i)) << pb[i].x(), pb[i].y(), 0.0;
  }
  return 100.0 * chamfer_distance(ma, mb);
}

struct EpisodeResult {
  bool success = false;
  int steps = 0;
  double offset_cm = 0;
};

EpisodeResult run_episode(const PolicyBundle& bundle, const gen::TaskInstance& task,
                          const Pose2& goal, const EvalOptions& opt, std::uint64_t tok_seed) {
  const double scale = std::min(bundle.schedule.final_scale, opt.sim.action_bound);
  wm::ChannelMask no_mask;
  sim::SceneState scene = task.scene;
  const sim::SceneState start = scene;
  sim::SceneCloudRenderer renderer(scene, bundle.budgets, opt.sim, task.seed);
  Eigen::Vector3d prev_action = Eigen::Vector3d::Zero();
  const int sym = bundle.reward_cfg.symmetry_aware
                      ? scene.bodies[static_cast<std::size_t>(scene.target_index())].symmetry_order
                      : 1;

  EpisodeResult out;
  for (; out.steps < opt.episode_cap;) {
    SceneObs so = build_scene_obs(scene, renderer, bundle.encoder.cfg, no_mask, tok_seed);
    const Eigen::VectorXd ob = build_env_state(scene, goal, prev_action, bundle.privileged, opt.sim);
    ad::Tensor<float> obs({1, kEnvStateDim});
    for (int d = 0; d < kEnvStateDim; ++d) obs.data[d] = static_cast<float>(ob[d]);

    std::vector<const wm::TokenBatch*> ptrs{&so.tokens};
    ad::Tape<float> enc_tape;
    ad::Tensor<float> tokens = enc_tape.val(bundle.encoder.encode(enc_tape, ptrs));
    ad::Tape<float> tape;
    PolicyOut po = policy_forward(tape, const_cast<ad::ParamTree<float>&>(bundle.policy),
                                  tape.constant(obs), tape.constant(tokens), bundle.policy_cfg);
    Eigen::Vector3d action;
    for (int d = 0; d < 3; ++d) action[d] = double(tape.val(po.mean).data[d]);
    action = scale * action.cwiseMax(-1.0).cwiseMin(1.0);

    scene = sim::step(scene, action, opt.sim).state;
    prev_action = action;
    out.steps += 1;

    if (sim::check_success(scene, goal, bundle.reward_cfg.tau_p, bundle.reward_cfg.tau_r, sym)) {
      out.success = true;
      break;
    }
    bool dropped = false;
    for (const auto& b : scene.bodies) dropped = dropped || b.dropped;
    if (dropped) break;
  }
  out.offset_cm = obstacle_offset_cm(start, scene, task.seed);
  return out;
}

}  // namespace

TrackReport evaluate_track(const PolicyBundle& bundle, const std::vector<gen::TaskInstance>& tasks,
                           gen::Difficulty difficulty, const EvalOptions& opt) {
  TrackReport report;
  report.difficulty = difficulty;
  report.scenes = static_cast<int>(tasks.size());
  const std::uint64_t tok_seed = derive_seed(opt.seed, 0x70c0u);

  struct Job {
    const gen::TaskInstance* task;
    Pose2 goal;
  };
  std::vector<Job> jobs;
  for (const auto& task : tasks) {
    const int goals = std::max(1, std::min<int>(opt.goals_per_scene,
                                                static_cast<int>(task.goal_candidates.size())));
    for (int g = 0; g < goals; ++g)
      jobs.push_back({&task, task.goal_candidates.empty()
                                 ? task.goal
                                 : task.goal_candidates[static_cast<std::size_t>(g)]});
  }

  std::vector<EpisodeResult> results(jobs.size());
  const int workers = std::max(1, opt.workers);
  auto worker_fn = [&](int w) {
    for (std::size_t i = static_cast<std::size_t>(w); i < jobs.size();
         i += static_cast<std::size_t>(workers))
      results[i] = run_episode(bundle, *jobs[i].task, jobs[i].goal, opt, tok_seed);
  };
  if (workers == 1) {
    worker_fn(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn, w);
    for (auto& th : pool) th.join();
  }

  double offset_sum = 0, steps_sum = 0;
  int successes = 0;
  for (const auto& r : results) {
    successes += r.success ? 1 : 0;
    offset_sum += r.offset_cm;
    steps_sum += r.steps;
  }
  report.episodes = static_cast<int>(results.size());
  report.success_rate_pct = results.empty() ? 0.0 : 100.0 * successes / results.size();
  report.mean_offset_cm = results.empty() ? 0.0 : offset_sum / results.size();
  report.mean_steps = results.empty() ? 0.0 : steps_sum / results.size();
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["tracks"] = nlohmann::json::array();
  for (const auto& t : report.tracks) {
    nlohmann::json jt;
    jt["track"] = gen::difficulty_name(t.difficulty);
    jt["scenes"] = t.scenes;
    jt["episodes"] = t.episodes;
    jt["success_rate_pct"] = t.success_rate_pct;
    jt["mean_offset_cm"] = t.mean_offset_cm;
    jt["mean_steps"] = t.mean_steps;
    j["tracks"].push_back(jt);
  }
  return j.dump(2);
}

}  // namespace pushdyn::rl
