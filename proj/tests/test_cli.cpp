#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pushdyn/binio.hpp"
#include "pushdyn/cur/curriculum.hpp"
#include "pushdyn/io/runconfig.hpp"

#ifndef PUSHDYN_CLI_PATH
#define PUSHDYN_CLI_PATH "pushdyn"
#endif

using namespace pushdyn;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
  auto p = fs::temp_directory_path() / (std::string("pushdyn_cli_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

int run_cli(const std::string& args, const std::string& log_path = "/dev/null") {
  const std::string cmd = std::string(PUSHDYN_CLI_PATH) + " " + args + " > " + log_path + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::vector<fs::path> run_dirs(const std::string& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("run config: unknown keys are rejected with their path") {
  io::RunConfig base;
  CHECK_THROWS_WITH_AS(base.apply_json(nlohmann::json{{"simx", 1}}),
                       doctest::Contains("simx"), io::ConfigError);
  CHECK_THROWS_WITH_AS(base.apply_json(nlohmann::json{{"sim", {{"dtx", 1}}}}),
                       doctest::Contains("sim.dtx"), io::ConfigError);
}

TEST_CASE("run config: layering of presets, files, and overrides") {
  const std::string dir = temp_dir("cfg");
  write_text_file(dir + "/cfg.json", R"({"sim": {"dt": 0.2}, "seed": 9})");
  auto cfg = io::RunConfig::load(dir + "/cfg.json", "", {"sim.substeps=7", "reward.d_max=0.3"});
  CHECK(cfg.sim.dt == 0.2);
  CHECK(cfg.seed == 9);
  CHECK(cfg.sim.substeps == 7);
  CHECK(cfg.reward.d_max == 0.3);

  auto paper = io::RunConfig::load("", "paper", {});
  CHECK(paper.budgets.target == 512);
  CHECK(paper.wm.dim == 128);
  CHECK(paper.wm.patches_target == 16);
  CHECK(paper.benchmark.paper_scale);

  CHECK_THROWS_AS(io::RunConfig::load("", "galactic", {}), io::ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("run config: environment variable overrides") {
  setenv("PUSHDYN_sim__dt", "0.05", 1);
  auto cfg = io::RunConfig::load("", "", {});
  CHECK(cfg.sim.dt == 0.05);
  unsetenv("PUSHDYN_sim__dt");
}

TEST_CASE("cli: gen-scenes writes the requested scenes with correct counts") {
  const std::string out = temp_dir("gen");
  REQUIRE(run_cli("gen-scenes --difficulty dense --count 4 --seed 7 --out " + out) == 0);
  auto dirs = run_dirs(out);
  REQUIRE(dirs.size() == 1);
  CHECK(fs::exists(dirs[0] / "config.json"));  // run dirs are self-describing
  int scene_files = 0;
  for (const auto& e : fs::directory_iterator(dirs[0] / "scenes")) {
    auto task = gen::load_task(e.path().string());
    CHECK(task.scene.bodies.size() == 12);
    scene_files += 1;
  }
  CHECK(scene_files == 4);
  fs::remove_all(out);
}

TEST_CASE("cli: bad config exits with the config error code") {
  const std::string out = temp_dir("bad");
  write_text_file(out + "/bad.json", R"({"nonsense_key": 1})");
  CHECK(run_cli("gen-scenes --count 1 --config " + out + "/bad.json --out " + out) == 2);
  CHECK(run_cli("eval --policy /nonexistent.ck --manifest /nonexistent.json --out " + out) == 3);
  fs::remove_all(out);
}

TEST_CASE("cli: gen-scenes is byte-reproducible for a fixed seed") {
  const std::string out1 = temp_dir("repro1");
  const std::string out2 = temp_dir("repro2");
  REQUIRE(run_cli("gen-scenes --difficulty sparse --count 3 --seed 21 --out " + out1) == 0);
  REQUIRE(run_cli("gen-scenes --difficulty sparse --count 3 --seed 21 --out " + out2) == 0);
  auto d1 = run_dirs(out1), d2 = run_dirs(out2);
  for (const auto& e : fs::directory_iterator(d1[0] / "scenes")) {
    const auto other = d2[0] / "scenes" / e.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(file_fnv1a64(e.path().string()) == file_fnv1a64(other.string()));
  }
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("cli: replay verifies a recorded episode") {
  // build a tiny dataset in-process, then check it through the CLI
  const std::string dir = temp_dir("replaycli");
  auto lib = gen::make_procedural_library(91, 4, 4);
  gen::GenConfig gcfg;
  sim::SimConfig sim_cfg;
  std::vector<gen::TaskInstance> tasks{
      gen::generate_scene(gen::Difficulty::Sparse, lib, 800, gcfg, sim_cfg)};

  rl::PolicyBundle policy;
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

  cur::CollectOptions copt;
  copt.sim = sim_cfg;
  copt.budgets = policy.budgets;
  copt.episode_cap = 6;
  copt.seed = 17;
  auto manifest = cur::collect_rollouts(policy, tasks, 5, dir, copt);
  REQUIRE(!manifest.files.empty());

  CHECK(run_cli("replay --episode " + (fs::path(dir) / manifest.files[0]).string()) == 0);
  CHECK(run_cli("replay --episode /nonexistent.epr") == 3);
  fs::remove_all(dir);
}

TEST_CASE("cli: ablation masking zeroes the masked channels in emitted clouds") {
  // the flag path: channel masking applied before tokenization
  Pcg32 rng(5);
  PhysPointCloud cloud(30);
  for (int i = 0; i < 30; ++i) {
    cloud.positions().row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0;
    cloud.masses()[i] = 0.5;
    cloud.velocities().row(i) << 1.0, 2.0, 0.0;
    cloud.labels[static_cast<std::size_t>(i)] =
        i < 10 ? PointLabel::Target : (i < 20 ? PointLabel::Obstacle : PointLabel::EndEffector);
  }
  wm::ChannelMask mask;
  mask.velocity = true;
  mask.phys = true;
  auto masked = wm::apply_channel_mask(cloud, mask);
  // channels 4..7 (mass and velocity) are zero; geometry is untouched
  CHECK(masked.feats.col(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(masked.feats.col(4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(masked.feats.col(5).cwiseAbs().maxCoeff() == 0.0);
  CHECK(masked.feats.col(6).cwiseAbs().maxCoeff() == 0.0);
  CHECK((masked.positions() - cloud.positions()).cwiseAbs().maxCoeff() == 0.0);

  wm::WMConfig wcfg;
  wcfg.patches_target = 2;
  wcfg.patches_obstacle = 2;
  wcfg.patches_ee = 1;
  wcfg.k = 6;
  wcfg.dim = 12;
  wcfg.blocks = 1;
  wcfg.heads = 2;
  auto tokens = wm::tokenize(masked, wcfg, 1);
  CHECK(tokens.member_feats.col(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(tokens.member_feats.rightCols<3>().cwiseAbs().maxCoeff() == 0.0);
}
