#pragma once

#include <cmath>

#include "pushdyn/ad/nn.hpp"

namespace pushdyn::ad {

template <class S>
struct AdamConfig {
  S lr = S(1e-3);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
};

template <class S>
struct AdamState {
  std::map<std::string, Tensor<S>> m;
  std::map<std::string, Tensor<S>> v;
  long step = 0;

  void reset() {
    m.clear();
    v.clear();
    step = 0;
  }
};

/// One Adam update over every parameter in the tree, with bias correction.
template <class S>
void adam_step(ParamTree<S>& tree, AdamState<S>& state, const AdamConfig<S>& cfg) {
  state.step += 1;
  const S bc1 = S(1) - S(std::pow(double(cfg.beta1), double(state.step)));
  const S bc2 = S(1) - S(std::pow(double(cfg.beta2), double(state.step)));
  for (auto& [name, p] : tree.params) {
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Tensor<S>::zeros(p.value.shape)).first;
      state.v.emplace(name, Tensor<S>::zeros(p.value.shape));
    }
    auto& m = mit->second.data;
    auto& v = state.v.at(name).data;
    m = cfg.beta1 * m + (S(1) - cfg.beta1) * p.grad.data;
    v = cfg.beta2 * v + (S(1) - cfg.beta2) * p.grad.data.square();
    p.value.data -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
  }
}

/// Global gradient-norm clipping; returns the pre-clip norm.
template <class S>
double clip_grad_norm(ParamTree<S>& tree, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : tree.params) sq += double(p.grad.data.square().sum());
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const S scale = S(max_norm / norm);
    for (auto& [name, p] : tree.params) p.grad.data *= scale;
  }
  return norm;
}

}  // namespace pushdyn::ad
