// pushdyn command line: scene generation, world-model and policy training,
// the alternating curriculum, distillation, evaluation, ablations, episode
// replay verification, and plot-ready CSV export.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "pushdyn/cur/curriculum.hpp"
#include "pushdyn/deploy/distill.hpp"
#include "pushdyn/io/runconfig.hpp"
#include "pushdyn/rl/eval.hpp"

namespace fs = std::filesystem;
using namespace pushdyn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissingArtifact = 3;
constexpr int kExitGeneration = 4;
constexpr int kExitDivergence = 5;
constexpr int kExitIo = 6;

struct Global {
  std::string config_path;
  std::string scale;
  std::string out_root = "runs";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

io::RunConfig resolve_config(const Global& g) {
  io::RunConfig cfg = io::RunConfig::load(g.config_path, g.scale, g.overrides);
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;
  return cfg;
}

std::string make_run_dir(const Global& g, const io::RunConfig& cfg, const std::string& name) {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto stamp = std::chrono::duration_cast<std::chrono::seconds>(now).count();
  const std::string dir = (fs::path(g.out_root) /
                           (name + "-" + std::to_string(stamp) + "-" + cfg.hash8()))
                              .string();
  fs::create_directories(dir);
  write_text_file((fs::path(dir) / "config.json").string(), cfg.canonical_text());
  return dir;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::string text = header + "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + fmt(row[i]);
    text += "\n";
  }
  write_text_file(path, text);
}

std::vector<gen::TaskInstance> load_tasks(const std::string& manifest_path, gen::Difficulty d,
                                          const std::string& split) {
  if (!fs::exists(manifest_path))
    throw std::runtime_error("manifest not found: " + manifest_path);
  const auto manifest = gen::load_manifest(manifest_path);
  const fs::path root = fs::path(manifest_path).parent_path();
  std::vector<gen::TaskInstance> tasks;
  for (const auto& e : manifest.select(d, split))
    tasks.push_back(gen::load_task((root / e.path).string()));
  return tasks;
}

std::vector<wm::WmSample> load_dataset_samples(const std::vector<std::string>& dirs) {
  std::vector<wm::WmSample> samples;
  for (const auto& dir : dirs) {
    const std::string mpath = (fs::path(dir) / "dataset.json").string();
    if (!fs::exists(mpath)) throw std::runtime_error("dataset manifest not found: " + mpath);
    auto m = cur::load_dataset_manifest(mpath);
    auto part = cur::load_samples(dir, m);
    samples.insert(samples.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }
  if (samples.empty()) throw std::runtime_error("no samples in the given dataset directories");
  return samples;
}

wm::WorldModel<float> load_wm(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("world model checkpoint not found: " + path);
  return wm::WorldModel<float>::from_checkpoint(ad::Checkpoint::load(path));
}

rl::PolicyBundle load_policy(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("policy checkpoint not found: " + path);
  return rl::PolicyBundle::load(path);
}

rl::PpoOptions ppo_options_from(const io::RunConfig& cfg) {
  rl::PpoOptions opt;
  opt.ppo = cfg.ppo;
  opt.reward = cfg.reward;
  opt.policy = cfg.policy;
  opt.sim = cfg.sim;
  opt.budgets = cfg.budgets;
  opt.schedule = cfg.schedule;
  opt.privileged = cfg.train.privileged;
  opt.no_pretrain = cfg.train.no_pretrain;
  opt.iterations = cfg.train.iterations;
  opt.seed = cfg.seed;
  return opt;
}

void write_curve_csv(const std::string& path, const std::vector<rl::CurveRow>& curve) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : curve)
    rows.push_back({double(r.iteration), r.success_rate, r.mean_reward, r.mean_offset_cm});
  write_csv(path, "iteration,success_rate,mean_reward,mean_offset_cm", rows);
}

void write_wm_csv(const std::string& path, const std::vector<wm::WmEpochMetrics>& metrics) {
  std::vector<std::vector<double>> rows;
  for (const auto& m : metrics)
    rows.push_back({double(m.epoch), m.l_pos, m.l_vel, m.l_var, m.heldout_chamfer_cm});
  write_csv(path, "epoch,L_pos,L_vel,L_var,heldout_chamfer_cm", rows);
}

wm::WorldModel<float> fresh_encoder(const io::RunConfig& cfg,
                                    const std::vector<gen::TaskInstance>& tasks) {
  auto model = wm::WorldModel<float>::init(cfg.wm, derive_seed(cfg.seed, 0x3340u));
  for (const auto& task : tasks) {
    sim::SceneCloudRenderer r(task.scene, cfg.budgets, cfg.sim, task.seed);
    model.stats = update_running_stats(model.stats, r.render(task.scene));
  }
  return model;
}

int cmd_gen_scenes(const Global& g, const std::string& difficulty, int count) {
  const io::RunConfig cfg = resolve_config(g);
  const std::string dir = make_run_dir(g, cfg, "gen-scenes");
  const auto lib = gen::make_procedural_library(derive_seed(cfg.seed, 0xa55e7u));

  if (difficulty == "all" && count <= 0) {
    auto manifest = gen::build_benchmark(dir, lib, cfg.benchmark, cfg.gen, cfg.sim);
    std::cout << "benchmark manifest: " << (fs::path(dir) / "manifest.json").string() << " ("
              << manifest.entries.size() << " scenes)\n";
    return kExitOk;
  }

  const int n = count > 0 ? count : cfg.benchmark.train_per_track;
  gen::BenchmarkManifest manifest;
  manifest.scale = cfg.scale;
  fs::create_directories(fs::path(dir) / "scenes");
  std::vector<gen::Difficulty> tracks;
  if (difficulty == "all")
    tracks = {gen::Difficulty::Sparse, gen::Difficulty::Moderate, gen::Difficulty::Dense};
  else
    tracks = {gen::difficulty_from_name(difficulty)};
  for (auto d : tracks) {
    for (int i = 0; i < n; ++i) {
      const std::uint64_t seed = cfg.benchmark.train_seed_base + static_cast<std::uint64_t>(i);
      auto task = gen::generate_scene(d, lib, seed, cfg.gen, cfg.sim);
      const std::string rel = "scenes/" + gen::difficulty_name(d) + "_train_" +
                              std::to_string(seed) + ".json";
      gen::save_task(task, (fs::path(dir) / rel).string());
      manifest.entries.push_back({d, "train", seed, rel});
    }
  }
  write_text_file((fs::path(dir) / "manifest.json").string(), gen::manifest_to_json(manifest));
  std::cout << "wrote " << manifest.entries.size() << " scenes under " << dir << "\n";
  return kExitOk;
}

int cmd_train_wm(const Global& g, const std::vector<std::string>& data_dirs,
                 const std::string& warm_start) {
  const io::RunConfig cfg = resolve_config(g);
  const std::string dir = make_run_dir(g, cfg, "train-wm");
  auto samples = load_dataset_samples(data_dirs);

  wm::WmTrainConfig tc;
  tc.epochs = cfg.wm_train.epochs;
  tc.batch = cfg.wm_train.batch;
  tc.lr = cfg.wm_train.lr;
  tc.lr_min = cfg.wm_train.lr_min;
  tc.heldout_frac = cfg.wm_train.heldout_frac;
  tc.seed = cfg.seed;

  std::optional<wm::WorldModel<float>> warm;
  if (!warm_start.empty()) warm = load_wm(warm_start);
  auto result = wm::train_world_model(samples, cfg.wm, tc, warm ? &*warm : nullptr);

  const std::string ck_path = (fs::path(dir) / "worldmodel.ck").string();
  result.model.to_checkpoint().save(ck_path);
  write_wm_csv((fs::path(dir) / "wm_train.csv").string(), result.metrics);
  std::cout << "world model: " << ck_path << "\n"
            << "final heldout chamfer: " << fmt(result.metrics.back().heldout_chamfer_cm)
            << " cm\n";
  return kExitOk;
}

int cmd_train_policy(const Global& g, const std::string& manifest, const std::string& track,
                     const std::string& wm_path, bool no_pretrain, int iterations) {
  io::RunConfig cfg = resolve_config(g);
  if (no_pretrain) cfg.train.no_pretrain = true;
  if (iterations > 0) cfg.train.iterations = iterations;
  const std::string dir = make_run_dir(g, cfg, "train-policy");

  auto tasks = load_tasks(manifest, gen::difficulty_from_name(track), "train");
  if (tasks.empty()) throw std::runtime_error("no train scenes for track " + track);

  wm::WorldModel<float> encoder;
  std::string parent_hash;
  if (cfg.train.no_pretrain) {
    encoder = fresh_encoder(cfg, tasks);
  } else {
    if (wm_path.empty())
      throw std::runtime_error("train-policy needs --wm CHECKPOINT (or --no-pretrain)");
    encoder = load_wm(wm_path);
    parent_hash = hex64(ad::Checkpoint::load(wm_path).content_hash());
  }

  rl::PpoOptions opt = ppo_options_from(cfg);
  auto result = rl::ppo_train(tasks, encoder, opt);

  rl::PolicyBundle bundle;
  bundle.policy_cfg = result.policy_cfg;
  bundle.reward_cfg = opt.reward;
  bundle.ppo_cfg = opt.ppo;
  bundle.schedule = opt.schedule;
  bundle.budgets = opt.budgets;
  bundle.privileged = opt.privileged;
  bundle.no_pretrain = opt.no_pretrain;
  bundle.encoder = result.encoder;
  bundle.policy = result.policy_params;
  bundle.wm_parent_hash = parent_hash;
  const std::string ck_path = (fs::path(dir) / "policy.ck").string();
  bundle.save(ck_path);
  write_curve_csv((fs::path(dir) / "curve.csv").string(), result.curve);
  std::cout << "policy: " << ck_path << "\n"
            << "episodes " << result.outcomes.episodes << ", final success "
            << fmt(result.curve.empty() ? 0.0 : result.curve.back().success_rate) << "%\n";
  return kExitOk;
}

int cmd_curriculum(const Global& g, const std::string& manifest, int rounds) {
  io::RunConfig cfg = resolve_config(g);
  if (rounds > 0) cfg.curriculum.rounds = rounds;
  const std::string dir = make_run_dir(g, cfg, "curriculum");

  auto train_tasks = load_tasks(manifest, gen::Difficulty::Sparse, "train");
  auto eval_tasks = load_tasks(manifest, gen::Difficulty::Sparse, "eval");
  if (train_tasks.empty()) throw std::runtime_error("no sparse train scenes in " + manifest);
  if (eval_tasks.empty()) eval_tasks = train_tasks;

  cur::CurriculumConfig ccfg;
  ccfg.rounds = cfg.curriculum.rounds;
  ccfg.collect_steps = cfg.curriculum.collect_steps;
  ccfg.bootstrap_threshold_pct = cfg.curriculum.bootstrap_threshold_pct;
  ccfg.bootstrap_iterations = cfg.curriculum.bootstrap_iterations;
  ccfg.ppo_iterations = cfg.curriculum.ppo_iterations;
  ccfg.wm_epochs = cfg.curriculum.wm_epochs;
  ccfg.replay_fraction = cfg.curriculum.replay_fraction;
  ccfg.heldout_episodes = cfg.curriculum.heldout_episodes;
  ccfg.eval_scenes = cfg.curriculum.eval_scenes;
  ccfg.eval_goals_per_scene = cfg.eval.goals_per_scene;
  ccfg.wm = cfg.wm;
  ccfg.wm_train.epochs = cfg.wm_train.epochs;
  ccfg.wm_train.batch = cfg.wm_train.batch;
  ccfg.wm_train.lr = cfg.wm_train.lr;
  ccfg.wm_train.lr_min = cfg.wm_train.lr_min;
  ccfg.wm_train.heldout_frac = cfg.wm_train.heldout_frac;
  ccfg.ppo = ppo_options_from(cfg);

  auto state = cur::run_curriculum(train_tasks, eval_tasks, ccfg, dir, cfg.seed);

  std::vector<std::vector<double>> rows;
  for (const auto& r : state.rounds)
    rows.push_back({double(r.round), r.success_rate_pct, r.wm_heldout_cm});
  write_csv((fs::path(dir) / "curriculum.csv").string(),
            "round,success_rate_pct,wm_heldout_cm", rows);
  std::cout << "curriculum state: " << (fs::path(dir) / "curriculum_state.json").string() << "\n";
  for (const auto& r : state.rounds)
    std::cout << "round " << r.round << ": success " << fmt(r.success_rate_pct) << "%, wm heldout "
              << fmt(r.wm_heldout_cm) << " cm\n";
  return kExitOk;
}

int cmd_distill(const Global& g, const std::string& teacher_path, const std::string& manifest,
                double sigma) {
  io::RunConfig cfg = resolve_config(g);
  if (sigma >= 0) cfg.distill.noise_sigma = sigma;
  const std::string dir = make_run_dir(g, cfg, "distill");

  auto teacher = load_policy(teacher_path);
  auto tasks = load_tasks(manifest, gen::Difficulty::Sparse, "train");
  if (tasks.empty()) throw std::runtime_error("no sparse train scenes in " + manifest);

  deploy::DistillConfig dcfg;
  dcfg.noise_sigma = cfg.distill.noise_sigma;
  dcfg.steps = cfg.distill.steps;
  dcfg.envs = cfg.distill.envs;
  dcfg.rollout_horizon = cfg.distill.rollout_horizon;
  dcfg.lr = cfg.distill.lr;
  dcfg.action_scale = cfg.distill.action_scale;
  dcfg.init_from_teacher = cfg.distill.init_from_teacher;
  dcfg.seed = cfg.seed;
  dcfg.sim = cfg.sim;
  auto result = deploy::distill(teacher, tasks, dcfg);

  const std::string ck_path = (fs::path(dir) / "student.ck").string();
  result.student.save(ck_path);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < result.losses.size(); ++i)
    rows.push_back({double(i), result.losses[i]});
  write_csv((fs::path(dir) / "distill.csv").string(), "step,loss", rows);
  std::cout << "student: " << ck_path << "\nloss " << fmt(result.initial_loss) << " -> "
            << fmt(result.final_loss) << "\n";
  return kExitOk;
}

int cmd_eval(const Global& g, const std::string& policy_path, const std::string& manifest,
             const std::string& tracks_arg) {
  const io::RunConfig cfg = resolve_config(g);
  const std::string dir = make_run_dir(g, cfg, "eval");

  auto bundle = load_policy(policy_path);
  std::vector<gen::Difficulty> tracks;
  if (tracks_arg == "all")
    tracks = {gen::Difficulty::Sparse, gen::Difficulty::Moderate, gen::Difficulty::Dense};
  else
    tracks = {gen::difficulty_from_name(tracks_arg)};

  rl::EvalOptions opt;
  opt.sim = cfg.sim;
  opt.episode_cap = cfg.eval.episode_cap;
  opt.goals_per_scene = cfg.eval.goals_per_scene;
  opt.workers = cfg.workers;
  opt.seed = cfg.seed;

  rl::EvalReport report;
  std::vector<std::vector<double>> rows;
  for (auto d : tracks) {
    auto tasks = load_tasks(manifest, d, "eval");
    if (tasks.empty()) continue;
    auto tr = rl::evaluate_track(bundle, tasks, d, opt);
    report.tracks.push_back(tr);
    rows.push_back({double(static_cast<int>(d)), double(tr.scenes), double(tr.episodes),
                    tr.success_rate_pct, tr.mean_offset_cm, tr.mean_steps});
    std::cout << gen::difficulty_name(d) << ": S.R. " << fmt(tr.success_rate_pct) << "%  M.O. "
              << fmt(tr.mean_offset_cm) << " cm  steps " << fmt(tr.mean_steps) << "\n";
  }
  write_text_file((fs::path(dir) / "report.json").string(), rl::report_to_json(report));
  write_csv((fs::path(dir) / "eval.csv").string(),
            "track,scenes,episodes,success_rate_pct,mean_offset_cm,mean_steps", rows);
  std::cout << "report: " << (fs::path(dir) / "report.json").string() << "\n";
  return kExitOk;
}

int cmd_ablate(const Global& g, const std::string& manifest, const std::string& data_dir,
               const std::string& pretext, const std::string& granularity, bool no_velocity,
               bool no_phys, int iterations) {
  io::RunConfig cfg = resolve_config(g);
  if (iterations > 0) cfg.train.iterations = iterations;
  const std::string dir = make_run_dir(g, cfg, "ablate");

  auto samples = load_dataset_samples({data_dir});
  auto tasks = load_tasks(manifest, gen::Difficulty::Sparse, "train");
  auto eval_tasks = load_tasks(manifest, gen::Difficulty::Sparse, "eval");
  if (eval_tasks.empty()) eval_tasks = tasks;

  wm::WmTrainConfig tc;
  tc.epochs = cfg.wm_train.epochs;
  tc.batch = cfg.wm_train.batch;
  tc.lr = cfg.wm_train.lr;
  tc.lr_min = cfg.wm_train.lr_min;
  tc.heldout_frac = cfg.wm_train.heldout_frac;
  tc.seed = cfg.seed;
  tc.mask.velocity = no_velocity;
  tc.mask.phys = no_phys;
  tc.pretext = pretext == "recon" ? wm::Pretext::Reconstruction : wm::Pretext::WorldModel;
  tc.granularity = granularity == "object" ? wm::Granularity::Object : wm::Granularity::Point;

  auto wm_result = wm::train_world_model(samples, cfg.wm, tc);
  wm_result.model.to_checkpoint().save((fs::path(dir) / "worldmodel.ck").string());
  write_wm_csv((fs::path(dir) / "wm_train.csv").string(), wm_result.metrics);

  rl::PpoOptions opt = ppo_options_from(cfg);
  opt.mask.velocity = no_velocity;
  opt.mask.phys = no_phys;
  auto ppo_result = rl::ppo_train(tasks, wm_result.model, opt);
  write_curve_csv((fs::path(dir) / "curve.csv").string(), ppo_result.curve);

  rl::PolicyBundle bundle;
  bundle.policy_cfg = ppo_result.policy_cfg;
  bundle.reward_cfg = opt.reward;
  bundle.ppo_cfg = opt.ppo;
  bundle.schedule = opt.schedule;
  bundle.budgets = opt.budgets;
  bundle.privileged = opt.privileged;
  bundle.encoder = ppo_result.encoder;
  bundle.policy = ppo_result.policy_params;
  bundle.save((fs::path(dir) / "policy.ck").string());

  rl::EvalOptions eopt;
  eopt.sim = cfg.sim;
  eopt.episode_cap = cfg.eval.episode_cap;
  eopt.goals_per_scene = cfg.eval.goals_per_scene;
  eopt.workers = cfg.workers;
  eopt.seed = cfg.seed;
  auto tr = rl::evaluate_track(bundle, eval_tasks, gen::Difficulty::Sparse, eopt);

  std::vector<std::vector<double>> rows{{pretext == "recon" ? 0.0 : 1.0,
                                         granularity == "object" ? 0.0 : 1.0,
                                         no_velocity ? 0.0 : 1.0, no_phys ? 0.0 : 1.0,
                                         wm_result.metrics.back().heldout_chamfer_cm,
                                         tr.success_rate_pct, tr.mean_offset_cm}};
  write_csv((fs::path(dir) / "ablate.csv").string(),
            "worldmodel_pretext,point_level,velocity,phys,pe_cm,success_rate_pct,mean_offset_cm",
            rows);
  std::cout << "ablation row: P.E. " << fmt(wm_result.metrics.back().heldout_chamfer_cm)
            << " cm, S.R. " << fmt(tr.success_rate_pct) << "%, M.O. " << fmt(tr.mean_offset_cm)
            << " cm\n";
  return kExitOk;
}

int cmd_replay(const std::string& episode_path) {
  if (!fs::exists(episode_path))
    throw std::runtime_error("episode not found: " + episode_path);
  auto ep = cur::load_episode(episode_path);
  const bool ok = cur::replay_matches(ep);
  std::cout << (ok ? "replay ok: " : "replay MISMATCH: ") << episode_path << " ("
            << ep.step_count() << " steps, outcome " << ep.outcome << ")\n";
  return ok ? kExitOk : 1;
}

int cmd_export_plots(const Global& g, const std::vector<std::string>& run_dirs) {
  const io::RunConfig cfg = resolve_config(g);
  const std::string dir = make_run_dir(g, cfg, "export-plots");
  int exported = 0;
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    const fs::path run(run_dirs[i]);
    if (fs::exists(run / "curve.csv")) {
      fs::copy_file(run / "curve.csv",
                    fs::path(dir) / ("learning_curve_" + std::to_string(i) + ".csv"));
      exported += 1;
    }
    if (fs::exists(run / "curriculum.csv")) {
      fs::copy_file(run / "curriculum.csv",
                    fs::path(dir) / ("curriculum_curve_" + std::to_string(i) + ".csv"));
      exported += 1;
    }
    if (fs::exists(run / "wm_train.csv")) {
      fs::copy_file(run / "wm_train.csv",
                    fs::path(dir) / ("wm_train_" + std::to_string(i) + ".csv"));
      exported += 1;
    }
  }
  std::cout << "exported " << exported << " series to " << dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pushdyn: planar clutter-pushing benchmark with a physical point-cloud world model"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  Global g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--scale", g.scale, "scale preset: desk or paper");
  app.add_option("--out", g.out_root, "root directory for run outputs");
  app.add_option("--set", g.overrides, "config override key.path=value (repeatable)");
  std::uint64_t seed_opt = 0;
  auto* seed_flag = app.add_option("--seed", seed_opt, "master seed");
  int workers_opt = 0;
  auto* workers_flag = app.add_option("--workers", workers_opt, "environment parallelism cap");

  // gen-scenes
  auto* gen_cmd = app.add_subcommand("gen-scenes", "generate benchmark scenes and manifests");
  std::string gen_difficulty = "all";
  int gen_count = 0;
  gen_cmd->add_option("--difficulty", gen_difficulty, "sparse|moderate|dense|all");
  gen_cmd->add_option("--count", gen_count, "scenes per track (0 = full benchmark)");

  // train-wm
  auto* wm_cmd = app.add_subcommand("train-wm", "train the point-cloud world model");
  std::vector<std::string> wm_data;
  std::string wm_warm;
  wm_cmd->add_option("--data", wm_data, "episode dataset directory (repeatable)")->required();
  wm_cmd->add_option("--warm-start", wm_warm, "world model checkpoint to continue from");

  // train-policy
  auto* pol_cmd = app.add_subcommand("train-policy", "PPO with a frozen dynamics encoder");
  std::string pol_manifest, pol_track = "sparse", pol_wm;
  bool pol_no_pretrain = false;
  int pol_iterations = 0;
  pol_cmd->add_option("--manifest", pol_manifest, "benchmark manifest")->required();
  pol_cmd->add_option("--track", pol_track, "difficulty track to train on");
  pol_cmd->add_option("--wm", pol_wm, "world model checkpoint (frozen encoder)");
  pol_cmd->add_flag("--no-pretrain", pol_no_pretrain, "train the encoder jointly from scratch");
  pol_cmd->add_option("--iterations", pol_iterations, "PPO iterations");

  // curriculum
  auto* cur_cmd = app.add_subcommand("curriculum", "alternating policy/world-model rounds");
  std::string cur_manifest;
  int cur_rounds = 0;
  cur_cmd->add_option("--manifest", cur_manifest, "benchmark manifest")->required();
  cur_cmd->add_option("--rounds", cur_rounds, "curriculum rounds");

  // distill
  auto* dis_cmd = app.add_subcommand("distill", "teacher-student distillation under noise");
  std::string dis_teacher, dis_manifest;
  double dis_sigma = -1;
  dis_cmd->add_option("--teacher", dis_teacher, "teacher policy checkpoint")->required();
  dis_cmd->add_option("--manifest", dis_manifest, "benchmark manifest")->required();
  dis_cmd->add_option("--sigma", dis_sigma, "observation noise sigma");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "benchmark evaluation of a policy");
  std::string eval_policy, eval_manifest, eval_tracks = "all";
  eval_cmd->add_option("--policy", eval_policy, "policy checkpoint")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "benchmark manifest")->required();
  eval_cmd->add_option("--tracks", eval_tracks, "sparse|moderate|dense|all");

  // ablate
  auto* abl_cmd = app.add_subcommand("ablate", "pretraining/input ablation row");
  std::string abl_manifest, abl_data, abl_pretext = "worldmodel", abl_granularity = "point";
  bool abl_no_velocity = false, abl_no_phys = false;
  int abl_iterations = 0;
  abl_cmd->add_option("--manifest", abl_manifest, "benchmark manifest")->required();
  abl_cmd->add_option("--data", abl_data, "episode dataset for pretraining")->required();
  abl_cmd->add_option("--pretext", abl_pretext, "worldmodel|recon");
  abl_cmd->add_option("--granularity", abl_granularity, "point|object");
  abl_cmd->add_flag("--no-velocity", abl_no_velocity, "mask velocity channels");
  abl_cmd->add_flag("--no-phys", abl_no_phys, "mask the mass channel");
  abl_cmd->add_option("--iterations", abl_iterations, "PPO iterations");

  // replay
  auto* rep_cmd = app.add_subcommand("replay", "verify an episode file re-steps bit-exactly");
  std::string rep_episode;
  rep_cmd->add_option("--episode", rep_episode, "episode file")->required();

  // export-plots
  auto* exp_cmd = app.add_subcommand("export-plots", "collect plot-ready CSV series");
  std::vector<std::string> exp_runs;
  exp_cmd->add_option("--run", exp_runs, "run directory (repeatable)")->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_flag) g.seed = seed_opt;
  if (*workers_flag) g.workers = workers_opt;

  try {
    if (*gen_cmd) return cmd_gen_scenes(g, gen_difficulty, gen_count);
    if (*wm_cmd) return cmd_train_wm(g, wm_data, wm_warm);
    if (*pol_cmd)
      return cmd_train_policy(g, pol_manifest, pol_track, pol_wm, pol_no_pretrain, pol_iterations);
    if (*cur_cmd) return cmd_curriculum(g, cur_manifest, cur_rounds);
    if (*dis_cmd) return cmd_distill(g, dis_teacher, dis_manifest, dis_sigma);
    if (*eval_cmd) return cmd_eval(g, eval_policy, eval_manifest, eval_tracks);
    if (*abl_cmd)
      return cmd_ablate(g, abl_manifest, abl_data, abl_pretext, abl_granularity, abl_no_velocity,
                        abl_no_phys, abl_iterations);
    if (*rep_cmd) return cmd_replay(rep_episode);
    if (*exp_cmd) return cmd_export_plots(g, exp_runs);
  } catch (const io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const gen::GenerationError& e) {
    std::cerr << "generation error: " << e.what() << "\n";
    return kExitGeneration;
  } catch (const rl::PpoDivergence& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    std::cerr << "error: " << msg << "\n";
    return msg.find("not found") != std::string::npos ? kExitMissingArtifact : kExitIo;
  }
  return kExitOk;
}
