#pragma once

#include "pushdyn/ad/checkpoint.hpp"
#include "pushdyn/io/config_json.hpp"
#include "pushdyn/rl/ppo.hpp"

namespace pushdyn::rl {

/// Self-contained policy artifact: actor-critic parameters plus the encoder
/// (with its stats) and every config needed to reproduce the run.
struct PolicyBundle {
  PolicyConfig policy_cfg;
  RewardConfig reward_cfg;
  PPOConfig ppo_cfg;
  deploy::ActionSchedule schedule;
  sim::CloudBudgets budgets;
  bool privileged = true;
  bool no_pretrain = false;
  std::string tag = "teacher";  // "student" for distilled checkpoints
  std::string obs_layout = "planar-v1";
  std::string wm_parent_hash;  // hash of the world-model checkpoint the encoder came from

  wm::WorldModel<float> encoder;
  ad::ParamTree<float> policy;

  ad::Checkpoint to_checkpoint() const {
    ad::Checkpoint ck;
    nlohmann::json j;
    j["type"] = "policy";
    j["tag"] = tag;
    j["obs_layout"] = obs_layout;
    j["privileged"] = privileged;
    j["no_pretrain"] = no_pretrain;
    j["wm_parent_hash"] = wm_parent_hash;
    j["policy_cfg"] = io::to_json(policy_cfg);
    j["reward_cfg"] = io::to_json(reward_cfg);
    j["ppo_cfg"] = io::to_json(ppo_cfg);
    j["schedule"] = io::to_json(schedule);
    j["budgets"] = io::to_json(budgets);
    j["wm"] = nlohmann::json::parse(encoder.to_checkpoint().config_json);
    ck.config_json = j.dump();
    for (const auto& [name, p] : policy.params) ck.params.create("policy/" + name, p.value);
    for (const auto& [name, p] : encoder.params.params) ck.params.create("wm/" + name, p.value);
    return ck;
  }

  void save(const std::string& path) const { to_checkpoint().save(path); }

  static PolicyBundle from_checkpoint(const ad::Checkpoint& ck) {
    const auto j = nlohmann::json::parse(ck.config_json);
    if (j.at("type").get<std::string>() != "policy")
      throw std::runtime_error("checkpoint is not a policy");
    PolicyBundle b;
    b.tag = j.value("tag", std::string("teacher"));
    b.obs_layout = j.at("obs_layout").get<std::string>();
    b.privileged = j.at("privileged").get<bool>();
    b.no_pretrain = j.at("no_pretrain").get<bool>();
    b.wm_parent_hash = j.at("wm_parent_hash").get<std::string>();
    io::from_json_into(j.at("policy_cfg"), b.policy_cfg);
    io::from_json_into(j.at("reward_cfg"), b.reward_cfg);
    io::from_json_into(j.at("ppo_cfg"), b.ppo_cfg);
    io::from_json_into(j.at("schedule"), b.schedule);
    io::from_json_into(j.at("budgets"), b.budgets);

    ad::Checkpoint wm_ck;
    wm_ck.config_json = j.at("wm").dump();
    for (const auto& [name, p] : ck.params.params) {
      if (name.rfind("policy/", 0) == 0)
        b.policy.create(name.substr(7), p.value);
      else if (name.rfind("wm/", 0) == 0)
        wm_ck.params.create(name.substr(3), p.value);
    }
    b.encoder = wm::WorldModel<float>::from_checkpoint(wm_ck);
    return b;
  }

  static PolicyBundle load(const std::string& path) {
    return from_checkpoint(ad::Checkpoint::load(path));
  }
};

}  // namespace pushdyn::rl
