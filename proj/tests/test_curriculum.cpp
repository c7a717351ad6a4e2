#include <doctest.h>

#include <filesystem>

#include "pushdyn/binio.hpp"
#include "pushdyn/cur/curriculum.hpp"

using namespace pushdyn;
using namespace pushdyn::cur;

namespace {

namespace fs = std::filesystem;

std::string temp_dir(const char* tag) {
  auto p = fs::temp_directory_path() / (std::string("pushdyn_cur_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

struct Tiny {
  gen::AssetLibrary lib = gen::make_procedural_library(91, 4, 4);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  std::vector<gen::TaskInstance> tasks;
  rl::PolicyBundle policy;

  Tiny() {
    for (int i = 0; i < 2; ++i)
      tasks.push_back(gen::generate_scene(gen::Difficulty::Sparse, lib, 700 + i, gcfg, sim_cfg));

    wm::WMConfig wcfg;
    wcfg.patches_target = 2;
    wcfg.patches_obstacle = 2;
    wcfg.patches_ee = 1;
    wcfg.k = 6;
    wcfg.dim = 12;
    wcfg.blocks = 1;
    wcfg.heads = 2;
    policy.encoder = wm::WorldModel<float>::init(wcfg, 3);
    policy.encoder.stats.count = 1;
    policy.encoder.stats.mean.setZero();
    policy.encoder.stats.m2.setOnes();
    policy.policy_cfg.fusion_hidden = {16, 8};
    Pcg32 rng(5);
    rl::build_policy_params(policy.policy, rng, rl::kEnvStateDim, wcfg.dim, policy.policy_cfg);
    policy.budgets = {24, 24, 12};
  }

  CollectOptions copt() const {
    CollectOptions o;
    o.sim = sim_cfg;
    o.budgets = policy.budgets;
    o.episode_cap = 12;
    o.seed = 9;
    return o;
  }
};

}  // namespace

TEST_CASE("collect_rollouts: budget convention, outcomes, byte-identical datasets") {
  Tiny t;
  const std::string dir1 = temp_dir("collect1");
  const std::string dir2 = temp_dir("collect2");

  auto m1 = collect_rollouts(t.policy, t.tasks, 40, dir1, t.copt());
  CHECK(m1.total_steps >= 40);
  CHECK(m1.total_steps < 40 + t.copt().episode_cap);
  CHECK(m1.files.size() == m1.hashes.size());

  // outcome labels partition episodes
  for (const auto& rel : m1.files) {
    auto ep = load_episode((fs::path(dir1) / rel).string());
    CHECK((ep.outcome == "success" || ep.outcome == "drop" || ep.outcome == "timeout"));
    CHECK(ep.step_count() <= t.copt().episode_cap);
  }

  // identical inputs give byte-identical files
  auto m2 = collect_rollouts(t.policy, t.tasks, 40, dir2, t.copt());
  REQUIRE(m1.files.size() == m2.files.size());
  for (std::size_t i = 0; i < m1.files.size(); ++i) CHECK(m1.hashes[i] == m2.hashes[i]);

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("episode files replay bit-exactly and round trip") {
  Tiny t;
  const std::string dir = temp_dir("replay");
  auto m = collect_rollouts(t.policy, t.tasks, 15, dir, t.copt());
  REQUIRE(!m.files.empty());

  auto ep = load_episode((fs::path(dir) / m.files[0]).string());
  CHECK(replay_matches(ep));

  // serialization round trip is byte-stable
  const std::string copy_path = (fs::path(dir) / "copy.epr").string();
  save_episode(ep, copy_path);
  CHECK(file_fnv1a64(copy_path) == m.hashes[0]);

  // samples align with the stored provenance
  auto samples = episode_to_samples(ep);
  REQUIRE(static_cast<int>(samples.size()) == ep.step_count());
  for (const auto& s : samples) {
    CHECK(s.cloud.size() == s.next_positions.rows());
    CHECK(s.next_positions.allFinite());
  }
  fs::remove_all(dir);
}

TEST_CASE("run_curriculum: one round executes all stages and records lineage") {
  Tiny t;
  const std::string dir = temp_dir("cur1");

  CurriculumConfig cfg;
  cfg.rounds = 1;
  cfg.collect_steps = 30;
  cfg.bootstrap_iterations = 1;
  cfg.bootstrap_threshold_pct = 0.0;  // returns after the first iteration
  cfg.ppo_iterations = 1;
  cfg.wm_epochs = 1;
  cfg.heldout_episodes = 1;
  cfg.eval_scenes = 1;
  cfg.wm.patches_target = 2;
  cfg.wm.patches_obstacle = 2;
  cfg.wm.patches_ee = 1;
  cfg.wm.k = 6;
  cfg.wm.dim = 12;
  cfg.wm.blocks = 1;
  cfg.wm.heads = 2;
  cfg.wm_train.batch = 8;
  cfg.ppo.sim = t.sim_cfg;
  cfg.ppo.budgets = t.policy.budgets;
  cfg.ppo.policy.fusion_hidden = {16, 8};
  cfg.ppo.ppo.envs = 2;
  cfg.ppo.ppo.horizon = 4;
  cfg.ppo.ppo.epochs = 1;
  cfg.ppo.ppo.minibatches = 1;
  cfg.ppo.ppo.episode_cap = 10;

  auto state = run_curriculum(t.tasks, t.tasks, cfg, dir, 33);
  REQUIRE(state.rounds.size() == 1);
  CHECK(state.stage_done("bootstrap"));
  CHECK(state.stage_done("round0/collect"));
  CHECK(state.stage_done("round0/wm"));
  CHECK(state.stage_done("round0/policy"));
  CHECK(state.stage_done("round0/eval"));
  CHECK(!state.rounds[0].wm_hash.empty());
  CHECK(!state.rounds[0].policy_hash.empty());
  CHECK(state.rounds[0].wm_parent_hash.empty());  // first round has no parent

  // lineage: the policy's frozen encoder equals the round's world model
  auto bundle = rl::PolicyBundle::load((fs::path(dir) / "round0_policy.ck").string());
  CHECK(bundle.wm_parent_hash == state.rounds[0].wm_hash);
  auto wm_ck = ad::Checkpoint::load((fs::path(dir) / "round0_wm.ck").string());
  auto wm_model = wm::WorldModel<float>::from_checkpoint(wm_ck);
  for (const auto& [name, p] : wm_model.params.params)
    CHECK((bundle.encoder.params.at(name).value.data == p.value.data).all());
  fs::remove_all(dir);
}

TEST_CASE("run_curriculum resumes to the identical final state") {
  Tiny t;
  const std::string dir_a = temp_dir("curA");
  const std::string dir_b = temp_dir("curB");

  CurriculumConfig cfg;
  cfg.rounds = 2;
  cfg.collect_steps = 25;
  cfg.bootstrap_iterations = 1;
  cfg.bootstrap_threshold_pct = 0.0;
  cfg.ppo_iterations = 1;
  cfg.wm_epochs = 1;
  cfg.heldout_episodes = 1;
  cfg.eval_scenes = 1;
  cfg.stop_success_delta_pct = -1.0;  // never early-stop (negative threshold)
  cfg.wm.patches_target = 2;
  cfg.wm.patches_obstacle = 2;
  cfg.wm.patches_ee = 1;
  cfg.wm.k = 6;
  cfg.wm.dim = 12;
  cfg.wm.blocks = 1;
  cfg.wm.heads = 2;
  cfg.wm_train.batch = 8;
  cfg.ppo.sim = t.sim_cfg;
  cfg.ppo.budgets = t.policy.budgets;
  cfg.ppo.policy.fusion_hidden = {16, 8};
  cfg.ppo.ppo.envs = 2;
  cfg.ppo.ppo.horizon = 4;
  cfg.ppo.ppo.epochs = 1;
  cfg.ppo.ppo.minibatches = 1;
  cfg.ppo.ppo.episode_cap = 10;

  // uninterrupted run
  auto full = run_curriculum(t.tasks, t.tasks, cfg, dir_a, 44);

  // interrupted: run only round 0 (rounds=1), then resume with rounds=2
  CurriculumConfig first = cfg;
  first.rounds = 1;
  run_curriculum(t.tasks, t.tasks, first, dir_b, 44);
  auto resumed = run_curriculum(t.tasks, t.tasks, cfg, dir_b, 44);

  REQUIRE(full.rounds.size() == resumed.rounds.size());
  for (std::size_t r = 0; r < full.rounds.size(); ++r) {
    CHECK(full.rounds[r].wm_hash == resumed.rounds[r].wm_hash);
    CHECK(full.rounds[r].policy_hash == resumed.rounds[r].policy_hash);
    CHECK(full.rounds[r].success_rate_pct == resumed.rounds[r].success_rate_pct);
    CHECK(full.rounds[r].wm_heldout_cm == resumed.rounds[r].wm_heldout_cm);
  }
  // checkpoint files themselves are identical
  CHECK(file_fnv1a64((fs::path(dir_a) / "round1_wm.ck").string()) ==
        file_fnv1a64((fs::path(dir_b) / "round1_wm.ck").string()));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}
