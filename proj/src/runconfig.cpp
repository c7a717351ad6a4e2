#include "pushdyn/io/runconfig.hpp"

#include <cstdlib>

#include "pushdyn/binio.hpp"

extern char** environ;

namespace pushdyn::io {

namespace {

void check_known_keys(const json& user, const json& schema, const std::string& path) {
  if (!user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key()))
      throw ConfigError("unknown config key: " + key_path);
    if (it.value().is_object()) check_known_keys(it.value(), schema.at(it.key()), key_path);
  }
}

json parse_scalar(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);  // plain string
  }
}

// "a.b.c=value" -> nested object {"a":{"b":{"c":value}}}
json override_to_json(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like key.path=value: " + spec);
  std::string path = spec.substr(0, eq);
  json value = parse_scalar(spec.substr(eq + 1));
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    parts.push_back(path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json out = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) out = json{{*it, out}};
  return out;
}

void merge_patch(json& base, const json& patch) {
  if (!patch.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base.at(it.key()).is_object() && it.value().is_object())
      merge_patch(base.at(it.key()), it.value());
    else
      base[it.key()] = it.value();
  }
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["scale"] = scale;
  j["seed"] = seed;
  j["workers"] = workers;
  j["sim"] = io::to_json(sim);
  j["budgets"] = io::to_json(budgets);
  j["wm"] = io::to_json(wm);
  j["reward"] = io::to_json(reward);
  j["ppo"] = io::to_json(ppo);
  j["policy"] = io::to_json(policy);
  j["schedule"] = io::to_json(schedule);
  j["clip"] = io::to_json(clip);
  j["gen"] = io::to_json(gen);
  j["benchmark"] = {{"train_per_track", benchmark.train_per_track},
                    {"eval_per_track", benchmark.eval_per_track},
                    {"paper_scale", benchmark.paper_scale},
                    {"train_seed_base", benchmark.train_seed_base},
                    {"eval_seed_base", benchmark.eval_seed_base}};
  j["wm_train"] = {{"epochs", wm_train.epochs},
                   {"batch", wm_train.batch},
                   {"lr", wm_train.lr},
                   {"lr_min", wm_train.lr_min},
                   {"heldout_frac", wm_train.heldout_frac}};
  j["train"] = {{"iterations", train.iterations},
                {"privileged", train.privileged},
                {"no_pretrain", train.no_pretrain}};
  j["curriculum"] = {{"rounds", curriculum.rounds},
                     {"collect_steps", curriculum.collect_steps},
                     {"bootstrap_threshold_pct", curriculum.bootstrap_threshold_pct},
                     {"bootstrap_iterations", curriculum.bootstrap_iterations},
                     {"ppo_iterations", curriculum.ppo_iterations},
                     {"wm_epochs", curriculum.wm_epochs},
                     {"replay_fraction", curriculum.replay_fraction},
                     {"heldout_episodes", curriculum.heldout_episodes},
                     {"eval_scenes", curriculum.eval_scenes}};
  j["eval"] = {{"episode_cap", eval.episode_cap}, {"goals_per_scene", eval.goals_per_scene}};
  j["distill"] = {{"noise_sigma", distill.noise_sigma},
                  {"steps", distill.steps},
                  {"envs", distill.envs},
                  {"rollout_horizon", distill.rollout_horizon},
                  {"lr", distill.lr},
                  {"action_scale", distill.action_scale},
                  {"init_from_teacher", distill.init_from_teacher}};
  j["collect"] = {{"action_scale", collect.action_scale}};
  return j;
}

std::string RunConfig::hash8() const {
  return hex64(fnv1a64(to_json().dump())).substr(8);
}

void RunConfig::apply_json(const json& j) {
  check_known_keys(j, to_json(), "");
  if (j.contains("scale")) scale = j.at("scale").get<std::string>();
  if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) workers = j.at("workers").get<int>();
  if (j.contains("sim")) from_json_into(j.at("sim"), sim);
  if (j.contains("budgets")) from_json_into(j.at("budgets"), budgets);
  if (j.contains("wm")) from_json_into(j.at("wm"), wm);
  if (j.contains("reward")) from_json_into(j.at("reward"), reward);
  if (j.contains("ppo")) from_json_into(j.at("ppo"), ppo);
  if (j.contains("policy")) from_json_into(j.at("policy"), policy);
  if (j.contains("schedule")) from_json_into(j.at("schedule"), schedule);
  if (j.contains("clip")) from_json_into(j.at("clip"), clip);
  if (j.contains("gen")) from_json_into(j.at("gen"), gen);
  if (j.contains("benchmark")) {
    const auto& b = j.at("benchmark");
    benchmark.train_per_track = b.value("train_per_track", benchmark.train_per_track);
    benchmark.eval_per_track = b.value("eval_per_track", benchmark.eval_per_track);
    benchmark.paper_scale = b.value("paper_scale", benchmark.paper_scale);
    benchmark.train_seed_base = b.value("train_seed_base", benchmark.train_seed_base);
    benchmark.eval_seed_base = b.value("eval_seed_base", benchmark.eval_seed_base);
  }
  if (j.contains("wm_train")) {
    const auto& w = j.at("wm_train");
    wm_train.epochs = w.value("epochs", wm_train.epochs);
    wm_train.batch = w.value("batch", wm_train.batch);
    wm_train.lr = w.value("lr", wm_train.lr);
    wm_train.lr_min = w.value("lr_min", wm_train.lr_min);
    wm_train.heldout_frac = w.value("heldout_frac", wm_train.heldout_frac);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    train.iterations = t.value("iterations", train.iterations);
    train.privileged = t.value("privileged", train.privileged);
    train.no_pretrain = t.value("no_pretrain", train.no_pretrain);
  }
  if (j.contains("curriculum")) {
    const auto& c = j.at("curriculum");
    curriculum.rounds = c.value("rounds", curriculum.rounds);
    curriculum.collect_steps = c.value("collect_steps", curriculum.collect_steps);
    curriculum.bootstrap_threshold_pct =
        c.value("bootstrap_threshold_pct", curriculum.bootstrap_threshold_pct);
    curriculum.bootstrap_iterations = c.value("bootstrap_iterations", curriculum.bootstrap_iterations);
    curriculum.ppo_iterations = c.value("ppo_iterations", curriculum.ppo_iterations);
    curriculum.wm_epochs = c.value("wm_epochs", curriculum.wm_epochs);
    curriculum.replay_fraction = c.value("replay_fraction", curriculum.replay_fraction);
    curriculum.heldout_episodes = c.value("heldout_episodes", curriculum.heldout_episodes);
    curriculum.eval_scenes = c.value("eval_scenes", curriculum.eval_scenes);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    eval.episode_cap = e.value("episode_cap", eval.episode_cap);
    eval.goals_per_scene = e.value("goals_per_scene", eval.goals_per_scene);
  }
  if (j.contains("distill")) {
    const auto& d = j.at("distill");
    distill.noise_sigma = d.value("noise_sigma", distill.noise_sigma);
    distill.steps = d.value("steps", distill.steps);
    distill.envs = d.value("envs", distill.envs);
    distill.rollout_horizon = d.value("rollout_horizon", distill.rollout_horizon);
    distill.lr = d.value("lr", distill.lr);
    distill.action_scale = d.value("action_scale", distill.action_scale);
    distill.init_from_teacher = d.value("init_from_teacher", distill.init_from_teacher);
  }
  if (j.contains("collect")) {
    const auto& c = j.at("collect");
    collect.action_scale = c.value("action_scale", collect.action_scale);
  }
}

RunConfig RunConfig::load(const std::string& path, const std::string& scale_override,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg;

  // scale preset first (file keys can refine it)
  std::string scale = scale_override;
  json file_json;
  if (!path.empty()) {
    try {
      file_json = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (scale.empty() && file_json.contains("scale"))
      scale = file_json.at("scale").get<std::string>();
  }
  if (scale.empty()) scale = "desk";
  if (scale == "paper") {
    cfg.scale = "paper";
    cfg.budgets = {512, 512, 256};
    cfg.wm = wm::WMConfig::paper();
    cfg.policy = rl::PolicyConfig::paper();
    cfg.benchmark.paper_scale = true;
    cfg.ppo.envs = 2048;
    cfg.curriculum.collect_steps = 60000;
  } else if (scale == "desk") {
    cfg.scale = "desk";
  } else {
    throw ConfigError("unknown scale preset: " + scale);
  }

  if (!file_json.is_null()) cfg.apply_json(file_json);

  // environment overrides: PUSHDYN_sim__dt=0.05 maps to sim.dt
  for (char** env = environ; *env != nullptr; ++env) {
    const std::string entry(*env);
    if (entry.rfind("PUSHDYN_", 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = entry.substr(8, eq - 8);
    std::string dotted;
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (key[i] == '_' && i + 1 < key.size() && key[i + 1] == '_') {
        dotted.push_back('.');
        ++i;
      } else {
        dotted.push_back(key[i]);
      }
    }
    cfg.apply_json(override_to_json(dotted + "=" + entry.substr(eq + 1)));
  }

  for (const auto& o : overrides) cfg.apply_json(override_to_json(o));

  cfg.wm.validate();
  cfg.ppo.validate();
  cfg.reward.validate();
  cfg.schedule.validate();
  return cfg;
}

}  // namespace pushdyn::io
