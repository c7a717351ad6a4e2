#include "pushdyn/gen/scenegen.hpp"

#include <filesystem>
#include <json.hpp>

#include "pushdyn/binio.hpp"

namespace pushdyn::gen {

using nlohmann::json;

std::string difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Sparse: return "sparse";
    case Difficulty::Moderate: return "moderate";
    default: return "dense";
  }
}

Difficulty difficulty_from_name(const std::string& name) {
  if (name == "sparse") return Difficulty::Sparse;
  if (name == "moderate") return Difficulty::Moderate;
  if (name == "dense") return Difficulty::Dense;
  throw std::invalid_argument("unknown difficulty: " + name);
}

TrackCounts track_counts(Difficulty d) {
  switch (d) {
    case Difficulty::Sparse: return {1, 2};
    case Difficulty::Moderate: return {3, 4};
    default: return {5, 6};
  }
}

namespace {

// EE start disc for placement exclusion.
Eigen::Vector2d ee_start_position(const GenConfig& gen, const sim::SimConfig& sim_cfg) {
  sim::ArmState arm;
  arm.q = gen.arm_init_q;
  const Pose2 base{sim_cfg.arm_base, sim_cfg.arm_base_theta};
  return base.apply(sim::forward_kinematics(arm).p);
}

bool placement_ok(const sim::RigidBody& candidate, const std::vector<sim::RigidBody>& placed,
                  const Eigen::Vector2d& ee_pos, double ee_radius, const GenConfig& gen,
                  const sim::SimConfig& sim_cfg) {
  const double half = sim_cfg.workspace_half;
  const double r = candidate.shape.bounding_radius();
  if (std::abs(candidate.pose.p.x()) > half - r - gen.placement_margin) return false;
  if (std::abs(candidate.pose.p.y()) > half - r - gen.placement_margin) return false;
  // keep clear of the pusher tip start and the arm base pivot
  if ((candidate.pose.p - ee_pos).norm() < r + ee_radius + 4 * gen.placement_margin) return false;
  if ((candidate.pose.p - sim_cfg.arm_base).norm() < r + 0.05) return false;
  for (const auto& other : placed) {
    const double rr = r + other.shape.bounding_radius() + gen.placement_margin;
    if ((candidate.pose.p - other.pose.p).squaredNorm() > rr * rr) continue;
    if (polygons_overlap(candidate.shape, candidate.pose, other.shape, other.pose,
                         gen.placement_margin))
      return false;
  }
  return true;
}

sim::RigidBody instantiate(const AssetSpec& asset, sim::BodyRole role, Pcg32& rng) {
  sim::RigidBody b = sim::RigidBody::make(asset.polygon, rng.uniform(asset.mass_min, asset.mass_max), role);
  b.height = asset.height;
  b.mu_s = rng.uniform(asset.friction_min, asset.friction_max);
  b.mu_d = b.mu_s * rng.uniform(0.7, 1.0);
  b.restitution = rng.uniform(asset.restitution_min, asset.restitution_max);
  b.ground_mu = rng.uniform(asset.ground_mu_min, asset.ground_mu_max);
  return b;
}

json pose_to_json(const Pose2& p) { return json::array({p.p.x(), p.p.y(), p.theta}); }

Pose2 pose_from_json(const json& j) {
  return Pose2{{j.at(0).get<double>(), j.at(1).get<double>()}, j.at(2).get<double>()};
}

}  // namespace

Pose2 sample_goal(std::uint64_t task_seed, const Pose2& target_initial,
                  const StablePoseSet& stable, double body_radius, const GenConfig& gen,
                  const sim::SimConfig& sim_cfg) {
  stable.validate();
  Pcg32 rng(task_seed);
  const double half = sim_cfg.workspace_half;
  sim::ArmState probe;
  const double reach = gen.reach_fraction * probe.reach();
  for (int attempt = 0; attempt < gen.max_goal_attempts; ++attempt) {
    Pose2 goal;
    goal.p = {rng.uniform(-half + body_radius + gen.placement_margin,
                          half - body_radius - gen.placement_margin),
              rng.uniform(-half + body_radius + gen.placement_margin,
                          half - body_radius - gen.placement_margin)};
    goal.theta = stable.sample(rng);
    if ((goal.p - target_initial.p).norm() < gen.min_goal_displacement) continue;
    if ((goal.p - sim_cfg.arm_base).norm() > reach) continue;
    return goal;
  }
  throw GenerationError("sample_goal: no admissible goal after " +
                        std::to_string(gen.max_goal_attempts) + " attempts (seed " +
                        std::to_string(task_seed) + ")");
}

TaskInstance generate_scene(Difficulty difficulty, const AssetLibrary& library,
                            std::uint64_t seed, const GenConfig& gen,
                            const sim::SimConfig& sim_cfg) {
  const TrackCounts counts = track_counts(difficulty);
  if (static_cast<int>(library.large.size()) < 1 || static_cast<int>(library.small.size()) < 1)
    throw GenerationError("generate_scene: asset library too small");

  Pcg32 rng(seed);
  const Eigen::Vector2d ee_pos = ee_start_position(gen, sim_cfg);

  sim::ArmState arm;
  arm.q = gen.arm_init_q;

  for (int restart = 0; restart < gen.max_scene_restarts; ++restart) {
    std::vector<sim::RigidBody> placed;
    bool failed = false;

    // target first: always a small-class asset, inside the central region
    {
      const AssetSpec& asset =
          library.small[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(library.small.size())))];
      sim::RigidBody target = instantiate(asset, sim::BodyRole::Target, rng);
      bool ok = false;
      for (int att = 0; att < gen.max_attempts_per_object; ++att) {
        target.pose.p = {rng.uniform(-gen.central_x, gen.central_x),
                         rng.uniform(-gen.central_y, gen.central_y)};
        target.pose.theta = asset.stable_poses.sample(rng);
        if (placement_ok(target, placed, ee_pos, arm.ee_radius, gen, sim_cfg)) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        failed = true;
      } else {
        placed.push_back(target);
      }
    }

    for (int k = 0; k < counts.large + counts.small && !failed; ++k) {
      const bool large = k < counts.large;
      const auto& pool = large ? library.large : library.small;
      const AssetSpec& asset =
          pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
      sim::RigidBody body = instantiate(asset, sim::BodyRole::Obstacle, rng);
      bool ok = false;
      const double half = sim_cfg.workspace_half;
      const double r = body.shape.bounding_radius();
      for (int att = 0; att < gen.max_attempts_per_object; ++att) {
        body.pose.p = {rng.uniform(-half + r, half - r), rng.uniform(-half + r, half - r)};
        body.pose.theta = asset.stable_poses.sample(rng);
        if (placement_ok(body, placed, ee_pos, arm.ee_radius, gen, sim_cfg)) {
          ok = true;
          break;
        }
      }
      if (!ok)
        failed = true;
      else
        placed.push_back(body);
    }

    if (failed) continue;

    TaskInstance task;
    task.scene.bodies = std::move(placed);
    task.scene.arm = arm;
    task.difficulty = difficulty;
    task.seed = seed;
    task.target_body = 0;

    const sim::RigidBody& target = task.scene.bodies[0];
    StablePoseSet stable = StablePoseSet::from_polygon(target.shape);
    for (int g = 0; g < gen.goal_candidates; ++g) {
      task.goal_candidates.push_back(sample_goal(derive_seed(seed, 0x60a1u, static_cast<std::uint64_t>(g)),
                                                 target.pose, stable,
                                                 target.shape.bounding_radius(), gen, sim_cfg));
    }
    task.goal = task.goal_candidates.front();
    return task;
  }

  throw GenerationError("generate_scene: placement failed for difficulty '" +
                        difficulty_name(difficulty) + "' seed " + std::to_string(seed) + " after " +
                        std::to_string(gen.max_scene_restarts) + " restarts");
}

std::string task_to_json(const TaskInstance& task) {
  json j;
  j["version"] = 1;
  j["seed"] = task.seed;
  j["difficulty"] = difficulty_name(task.difficulty);
  j["target_body"] = task.target_body;
  j["goal_pose"] = pose_to_json(task.goal);
  json cands = json::array();
  for (const auto& g : task.goal_candidates) cands.push_back(pose_to_json(g));
  j["goal_candidates"] = cands;

  json bodies = json::array();
  for (const auto& b : task.scene.bodies) {
    json jb;
    json poly = json::array();
    for (int i = 0; i < b.shape.count(); ++i)
      poly.push_back(json::array({b.shape.vertex(i).x(), b.shape.vertex(i).y()}));
    jb["polygon"] = poly;
    jb["height"] = b.height;
    jb["pose"] = pose_to_json(b.pose);
    jb["mass"] = b.mass;
    jb["mu_s"] = b.mu_s;
    jb["mu_d"] = b.mu_d;
    jb["e"] = b.restitution;
    jb["ground_mu"] = b.ground_mu;
    jb["role"] = b.role == sim::BodyRole::Target ? "target" : "obstacle";
    bodies.push_back(jb);
  }
  j["bodies"] = bodies;

  json ja;
  ja["q"] = {task.scene.arm.q[0], task.scene.arm.q[1], task.scene.arm.q[2]};
  ja["link_lengths"] = {task.scene.arm.link_lengths[0], task.scene.arm.link_lengths[1],
                        task.scene.arm.link_lengths[2]};
  ja["ee_radius"] = task.scene.arm.ee_radius;
  j["arm_init"] = ja;
  return j.dump(2);
}

TaskInstance task_from_json(const std::string& text) {
  const json j = json::parse(text);
  TaskInstance task;
  task.seed = j.at("seed").get<std::uint64_t>();
  task.difficulty = difficulty_from_name(j.at("difficulty").get<std::string>());
  task.target_body = j.at("target_body").get<int>();
  task.goal = pose_from_json(j.at("goal_pose"));
  for (const auto& g : j.at("goal_candidates")) task.goal_candidates.push_back(pose_from_json(g));

  for (const auto& jb : j.at("bodies")) {
    const auto& poly = jb.at("polygon");
    Eigen::Matrix2Xd verts(2, static_cast<int>(poly.size()));
    for (int i = 0; i < static_cast<int>(poly.size()); ++i) {
      verts(0, i) = poly.at(static_cast<std::size_t>(i)).at(0).get<double>();
      verts(1, i) = poly.at(static_cast<std::size_t>(i)).at(1).get<double>();
    }
    const auto role =
        jb.at("role").get<std::string>() == "target" ? sim::BodyRole::Target : sim::BodyRole::Obstacle;
    // vertices in the file are already canonical; rebuild without recentering
    sim::RigidBody b;
    b.shape = ConvexPolygon(verts);
    b.mass = jb.at("mass").get<double>();
    b.inertia = b.mass * b.shape.inertia_per_mass();
    b.symmetry_order = b.shape.symmetry_order();
    b.role = role;
    b.height = jb.at("height").get<double>();
    b.pose = pose_from_json(jb.at("pose"));
    b.mu_s = jb.at("mu_s").get<double>();
    b.mu_d = jb.at("mu_d").get<double>();
    b.restitution = jb.at("e").get<double>();
    b.ground_mu = jb.at("ground_mu").get<double>();
    task.scene.bodies.push_back(std::move(b));
  }

  const auto& ja = j.at("arm_init");
  for (int i = 0; i < 3; ++i) {
    task.scene.arm.q[i] = ja.at("q").at(static_cast<std::size_t>(i)).get<double>();
    task.scene.arm.link_lengths[i] =
        ja.at("link_lengths").at(static_cast<std::size_t>(i)).get<double>();
  }
  task.scene.arm.ee_radius = ja.at("ee_radius").get<double>();
  return task;
}

void save_task(const TaskInstance& task, const std::string& path) {
  write_text_file(path, task_to_json(task));
}

TaskInstance load_task(const std::string& path) { return task_from_json(read_text_file(path)); }

std::vector<ManifestEntry> BenchmarkManifest::select(Difficulty d, const std::string& split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.difficulty == d && e.split == split) out.push_back(e);
  return out;
}

BenchmarkManifest build_benchmark(const std::string& out_dir, const AssetLibrary& library,
                                  const BenchmarkSpec& spec, const GenConfig& gen,
                                  const sim::SimConfig& sim_cfg) {
  namespace fs = std::filesystem;
  const std::vector<Difficulty> tracks{Difficulty::Sparse, Difficulty::Moderate, Difficulty::Dense};

  struct Plan {
    Difficulty d;
    std::string split;
    int count;
  };
  std::vector<Plan> plans;
  for (auto d : tracks) {
    const int train = spec.paper_scale ? (d == Difficulty::Sparse ? 1024 : 0) : spec.train_per_track;
    const int eval = spec.paper_scale ? 128 : spec.eval_per_track;
    if (train > 0) plans.push_back({d, "train", train});
    plans.push_back({d, "eval", eval});
  }

  int total_train = 0, total_eval = 0;
  for (const auto& p : plans) (p.split == "train" ? total_train : total_eval) += p.count;
  const std::uint64_t train_lo = spec.train_seed_base, train_hi = spec.train_seed_base + static_cast<std::uint64_t>(total_train);
  const std::uint64_t eval_lo = spec.eval_seed_base, eval_hi = spec.eval_seed_base + static_cast<std::uint64_t>(total_eval);
  if (train_lo < eval_hi && eval_lo < train_hi)
    throw std::invalid_argument("build_benchmark: train/eval seed ranges overlap");

  fs::create_directories(fs::path(out_dir) / "scenes");

  BenchmarkManifest manifest;
  manifest.scale = spec.paper_scale ? "paper" : "desk";
  std::uint64_t next_train = train_lo, next_eval = eval_lo;
  for (const auto& p : plans) {
    for (int i = 0; i < p.count; ++i) {
      const std::uint64_t seed = p.split == "train" ? next_train++ : next_eval++;
      TaskInstance task = generate_scene(p.d, library, seed, gen, sim_cfg);
      const std::string rel =
          "scenes/" + difficulty_name(p.d) + "_" + p.split + "_" + std::to_string(seed) + ".json";
      save_task(task, (fs::path(out_dir) / rel).string());
      manifest.entries.push_back({p.d, p.split, seed, rel});
    }
  }

  write_text_file((fs::path(out_dir) / "manifest.json").string(), manifest_to_json(manifest));
  return manifest;
}

std::string manifest_to_json(const BenchmarkManifest& m) {
  json j;
  j["version"] = 1;
  j["scale"] = m.scale;
  json entries = json::array();
  for (const auto& e : m.entries) {
    json je;
    je["difficulty"] = difficulty_name(e.difficulty);
    je["split"] = e.split;
    je["seed"] = e.seed;
    je["path"] = e.path;
    entries.push_back(je);
  }
  j["entries"] = entries;
  return j.dump(2);
}

BenchmarkManifest manifest_from_json(const std::string& text) {
  const json j = json::parse(text);
  BenchmarkManifest m;
  m.scale = j.at("scale").get<std::string>();
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.difficulty = difficulty_from_name(je.at("difficulty").get<std::string>());
    e.split = je.at("split").get<std::string>();
    e.seed = je.at("seed").get<std::uint64_t>();
    e.path = je.at("path").get<std::string>();
    m.entries.push_back(e);
  }
  return m;
}

BenchmarkManifest load_manifest(const std::string& path) {
  return manifest_from_json(read_text_file(path));
}

}  // namespace pushdyn::gen
