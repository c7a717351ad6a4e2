#pragma once

#include "pushdyn/ad/nn.hpp"

namespace pushdyn::rl {

/// Actor-critic layout: env-state query cross-attends over the dynamics
/// tokens, the attended feature joins the raw env state in a fusion MLP, and
/// two small heads emit the Gaussian action mean and the value.
struct PolicyConfig {
  std::vector<int> fusion_hidden = {128, 64, 32};  // last entry is the fused width
  int head_hidden = 64;
  int xattn_heads = 4;
  int action_dim = 3;
  // actions are normalized: executed dq = schedule_scale * clamp(a, -1, 1),
  // so sigma = 0.5 here means an executed sigma of half the current scale
  double init_log_std = std::log(0.5);

  static PolicyConfig paper() {
    PolicyConfig c;
    c.fusion_hidden = {512, 256, 128};
    return c;
  }
};

inline void build_policy_params(ad::ParamTree<float>& tree, Pcg32& rng, int obs_dim, int token_dim,
                                const PolicyConfig& cfg) {
  ad::create_linear(tree, rng, "query", obs_dim, token_dim);
  ad::create_attention(tree, rng, "xattn", token_dim);
  int d = token_dim + obs_dim;
  for (std::size_t i = 0; i < cfg.fusion_hidden.size(); ++i) {
    ad::create_linear(tree, rng, "fusion/l" + std::to_string(i), d, cfg.fusion_hidden[i]);
    d = cfg.fusion_hidden[i];
  }
  ad::create_mlp(tree, rng, "actor", d, {cfg.head_hidden}, cfg.action_dim);
  ad::create_mlp(tree, rng, "critic", d, {cfg.head_hidden}, 1);
  tree.create("log_std",
              ad::Tensor<float>::full({cfg.action_dim}, static_cast<float>(cfg.init_log_std)));
}

struct PolicyOut {
  ad::Var mean;     // [B, action_dim]
  ad::Var value;    // [B, 1]
  ad::Var fused;    // [B, fusion_hidden.back()] - matched during distillation
  ad::Var log_std;  // [action_dim]
};

/// Forward pass. `tokens` is [B, P, D]: a constant when the encoder is
/// frozen, or a live graph output when trained jointly.
inline PolicyOut policy_forward(ad::Tape<float>& t, ad::ParamTree<float>& tree, ad::Var obs,
                                ad::Var tokens, const PolicyConfig& cfg) {
  const auto& os = t.val(obs).shape;
  const auto& ts = t.val(tokens).shape;
  if (os.size() != 2 || ts.size() != 3)
    throw std::invalid_argument("policy_forward: obs must be [B, O], tokens [B, P, D]");
  const int B = os[0], D = ts[2];

  ad::Var q = ad::reshape(t, ad::linear(t, tree, "query", obs), {B, 1, D});
  ad::Var z = ad::attention(t, tree, "xattn", q, tokens, cfg.xattn_heads);
  z = ad::reshape(t, z, {B, D});

  ad::Var h = ad::concat(t, z, obs);
  for (std::size_t i = 0; i < cfg.fusion_hidden.size(); ++i)
    h = ad::tanh(t, ad::linear(t, tree, "fusion/l" + std::to_string(i), h));

  PolicyOut out;
  out.fused = h;
  out.mean = ad::mlp(t, tree, "actor", h, {cfg.head_hidden}, ad::Act::Tanh);
  out.value = ad::mlp(t, tree, "critic", h, {cfg.head_hidden}, ad::Act::Tanh);
  out.log_std = t.param(tree.at("log_std"));
  return out;
}

/// Diagonal-Gaussian log density of `actions` under (mean, log_std),
/// summed over action dimensions: [B, 1].
inline ad::Var gaussian_log_prob(ad::Tape<float>& t, ad::Var mean, ad::Var log_std,
                                 ad::Var actions) {
  const int dims = t.val(log_std).shape[0];
  ad::Var z = ad::div(t, ad::sub(t, actions, mean), ad::exp(t, log_std));
  ad::Var quad = ad::sum_axis(t, ad::square(t, z), -1);  // [B]
  ad::Var logdet = ad::sum_all(t, log_std);
  const float c = 0.5f * static_cast<float>(dims) * std::log(2.0f * static_cast<float>(M_PI));
  ad::Var lp = ad::mul_scalar(t, quad, -0.5f);
  lp = ad::sub(t, lp, logdet);  // broadcast scalar
  return ad::add_scalar(t, lp, -c);
}

/// Gaussian entropy (state independent): sum_d log_std_d + d/2 (1 + log 2pi).
inline ad::Var gaussian_entropy(ad::Tape<float>& t, ad::Var log_std) {
  const int dims = t.val(log_std).shape[0];
  const float c = 0.5f * static_cast<float>(dims) * (1.0f + std::log(2.0f * static_cast<float>(M_PI)));
  return ad::add_scalar(t, ad::sum_all(t, log_std), c);
}

}  // namespace pushdyn::rl
