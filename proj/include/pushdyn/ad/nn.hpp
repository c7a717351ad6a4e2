#pragma once

#include <map>
#include <string>

#include "pushdyn/ad/tape.hpp"
#include "pushdyn/rng.hpp"

namespace pushdyn::ad {

/// Ordered, named parameter collection. std::map keeps iteration (and thus
/// serialization, hashing, optimizer order) deterministic.
template <class S>
struct ParamTree {
  std::map<std::string, Param<S>> params;

  Param<S>& at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("param not found: " + name);
    return it->second;
  }
  const Param<S>& at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("param not found: " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return params.count(name) > 0; }

  Param<S>& create(const std::string& name, Tensor<S> init) {
    auto [it, fresh] = params.emplace(name, Param<S>(std::move(init)));
    if (!fresh) throw std::invalid_argument("param already exists: " + name);
    return it->second;
  }

  void zero_grads() {
    for (auto& [k, p] : params) p.zero_grad();
  }

  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    for (const auto& [k, p] : params) n += p.value.numel();
    return n;
  }

  template <class T>
  ParamTree<T> cast() const {
    ParamTree<T> out;
    for (const auto& [k, p] : params) out.create(k, p.value.template cast<T>());
    return out;
  }

  /// Accumulates another tree's gradients into this one (same structure).
  void add_grads_from(const ParamTree<S>& other) {
    for (auto& [k, p] : params) p.grad.data += other.at(k).grad.data;
  }
};

template <class S>
Tensor<S> uniform_init(Pcg32& rng, std::vector<int> shape, double scale) {
  Tensor<S> t(std::move(shape));
  for (Eigen::Index i = 0; i < t.numel(); ++i) t.data[i] = S(rng.uniform(-scale, scale));
  return t;
}

/// Xavier-uniform init for a [in, out] weight.
template <class S>
Tensor<S> xavier_init(Pcg32& rng, int in, int out) {
  return uniform_init<S>(rng, {in, out}, std::sqrt(6.0 / (in + out)));
}

template <class S>
void create_linear(ParamTree<S>& tree, Pcg32& rng, const std::string& prefix, int in, int out) {
  tree.create(prefix + "/w", xavier_init<S>(rng, in, out));
  tree.create(prefix + "/b", Tensor<S>::zeros({out}));
}

template <class S>
Var linear(Tape<S>& t, ParamTree<S>& tree, const std::string& prefix, Var x) {
  Var w = t.param(tree.at(prefix + "/w"));
  Var b = t.param(tree.at(prefix + "/b"));
  return add(t, matmul(t, x, w), b);
}

enum class Act { Tanh, Gelu, Relu, None };

template <class S>
Var activate(Tape<S>& t, Var x, Act act) {
  switch (act) {
    case Act::Tanh: return tanh(t, x);
    case Act::Gelu: return gelu(t, x);
    case Act::Relu: return relu(t, x);
    default: return x;
  }
}

template <class S>
void create_mlp(ParamTree<S>& tree, Pcg32& rng, const std::string& prefix, int in,
                const std::vector<int>& hidden, int out) {
  int d = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    create_linear(tree, rng, prefix + "/l" + std::to_string(i), d, hidden[i]);
    d = hidden[i];
  }
  create_linear(tree, rng, prefix + "/out", d, out);
}

template <class S>
Var mlp(Tape<S>& t, ParamTree<S>& tree, const std::string& prefix, Var x,
        const std::vector<int>& hidden, Act act) {
  Var h = x;
  for (std::size_t i = 0; i < hidden.size(); ++i)
    h = activate(t, linear(t, tree, prefix + "/l" + std::to_string(i), h), act);
  return linear(t, tree, prefix + "/out", h);
}

template <class S>
void create_layer_norm(ParamTree<S>& tree, const std::string& prefix, int dim) {
  tree.create(prefix + "/gamma", Tensor<S>::ones({dim}));
  tree.create(prefix + "/beta", Tensor<S>::zeros({dim}));
}

template <class S>
Var layer_norm(Tape<S>& t, ParamTree<S>& tree, const std::string& prefix, Var x) {
  return layer_norm(t, x, t.param(tree.at(prefix + "/gamma")), t.param(tree.at(prefix + "/beta")));
}

template <class S>
void create_attention(ParamTree<S>& tree, Pcg32& rng, const std::string& prefix, int dim) {
  create_linear(tree, rng, prefix + "/q", dim, dim);
  create_linear(tree, rng, prefix + "/k", dim, dim);
  create_linear(tree, rng, prefix + "/v", dim, dim);
  create_linear(tree, rng, prefix + "/o", dim, dim);
}

/// Multi-head attention. Query input [B, Tq, D], key/value input [B, Tk, D].
template <class S>
Var attention(Tape<S>& t, ParamTree<S>& tree, const std::string& prefix, Var query_in, Var kv_in,
              int heads) {
  const auto& qs = t.val(query_in).shape;
  const auto& ks = t.val(kv_in).shape;
  if (qs.size() != 3 || ks.size() != 3)
    throw std::invalid_argument("attention: inputs must be [B, T, D]");
  const int B = qs[0], Tq = qs[1], D = qs[2], Tk = ks[1];
  if (D % heads != 0) throw std::invalid_argument("attention: dim not divisible by heads");
  const int hd = D / heads;

  auto split = [&](Var x, int T) {
    // [B, T, D] -> [B*heads, T, hd]
    Var r = reshape(t, x, {B, T, heads, hd});
    r = permute(t, r, {0, 2, 1, 3});
    return reshape(t, r, {B * heads, T, hd});
  };
  Var q = split(linear(t, tree, prefix + "/q", query_in), Tq);
  Var k = split(linear(t, tree, prefix + "/k", kv_in), Tk);
  Var v = split(linear(t, tree, prefix + "/v", kv_in), Tk);

  Var kT = permute(t, k, {0, 2, 1});
  Var scores = mul_scalar(t, matmul(t, q, kT), S(1.0 / std::sqrt(double(hd))));
  Var attn = softmax(t, scores);
  Var ctx = matmul(t, attn, v);  // [B*heads, Tq, hd]
  ctx = reshape(t, ctx, {B, heads, Tq, hd});
  ctx = permute(t, ctx, {0, 2, 1, 3});
  ctx = reshape(t, ctx, {B, Tq, D});
  return linear(t, tree, prefix + "/o", ctx);
}

template <class S>
void create_transformer_block(ParamTree<S>& tree, Pcg32& rng, const std::string& prefix, int dim,
                              int mlp_ratio = 4) {
  create_layer_norm(tree, prefix + "/ln1", dim);
  create_attention(tree, rng, prefix + "/attn", dim);
  create_layer_norm(tree, prefix + "/ln2", dim);
  create_linear(tree, rng, prefix + "/mlp/l0", dim, dim * mlp_ratio);
  create_linear(tree, rng, prefix + "/mlp/out", dim * mlp_ratio, dim);
}

/// Pre-norm transformer block: x += MHSA(LN(x)); x += MLP(LN(x)).
template <class S>
Var transformer_block(Tape<S>& t, ParamTree<S>& tree, const std::string& prefix, Var x, int heads,
                      Var kv = Var{}) {
  Var n1 = layer_norm(t, tree, prefix + "/ln1", x);
  Var a = attention(t, tree, prefix + "/attn", n1, kv.valid() ? kv : n1, heads);
  x = add(t, x, a);
  Var n2 = layer_norm(t, tree, prefix + "/ln2", x);
  Var h = gelu(t, linear(t, tree, prefix + "/mlp/l0", n2));
  Var m = linear(t, tree, prefix + "/mlp/out", h);
  return add(t, x, m);
}

}  // namespace pushdyn::ad
