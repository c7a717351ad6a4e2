#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pushdyn/ad/tensor.hpp"

namespace pushdyn::ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Named parameter with a gradient slot. Gradients accumulate across tapes
/// until explicitly zeroed.
template <class S>
struct Param {
  Tensor<S> value;
  Tensor<S> grad;

  Param() = default;
  explicit Param(Tensor<S> v) : value(std::move(v)), grad(Tensor<S>::zeros(value.shape)) {}

  void zero_grad() { grad.data.setZero(); }
};

/// Reverse-mode tape over dense tensors. Single-owner, single-threaded;
/// minibatch parallelism runs independent tapes and reduces Param grads.
template <class S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<S> v) { return Var{push(std::move(v))}; }

  Var param(Param<S>& p) {
    const int id = push(p.value);
    hooks_.push_back({id, &p});
    return Var{id};
  }

  const Tensor<S>& val(Var v) const { return vals_[static_cast<std::size_t>(v.id)]; }

  bool has_grad(Var v) const {
    return grads_[static_cast<std::size_t>(v.id)].numel() > 0;
  }

  Tensor<S>& grad(Var v) {
    auto& g = grads_[static_cast<std::size_t>(v.id)];
    if (g.numel() == 0) g = Tensor<S>::zeros(vals_[static_cast<std::size_t>(v.id)].shape);
    return g;
  }

  /// Seeds the scalar loss gradient and runs all recorded backward rules in
  /// reverse order, then accumulates leaf gradients into their Params.
  void backward(Var loss) {
    if (val(loss).numel() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(val(loss).shape));
    grad(loss).data.setConstant(S(1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
    for (const auto& [id, p] : hooks_) {
      const auto& g = grads_[static_cast<std::size_t>(id)];
      if (g.numel() > 0) p->grad.data += g.data;
    }
  }

  // --- internals used by the op implementations ---
  int push(Tensor<S> v) {
    vals_.push_back(std::move(v));
    grads_.emplace_back();
    return static_cast<int>(vals_.size()) - 1;
  }
  void record(std::function<void(Tape&)> fn) { nodes_.push_back(std::move(fn)); }

 private:
  std::vector<Tensor<S>> vals_;
  std::vector<Tensor<S>> grads_;  // empty tensor = not yet needed
  std::vector<std::function<void(Tape&)>> nodes_;
  std::vector<std::pair<int, Param<S>*>> hooks_;
};

namespace detail {

inline bool is_suffix(const std::vector<int>& small, const std::vector<int>& big) {
  if (small.size() > big.size()) return false;
  for (std::size_t i = 0; i < small.size(); ++i)
    if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
  return true;
}

template <class S>
void check_binary(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape == b.shape) return;
  if (b.numel() == 1) return;  // scalar broadcast
  if (is_suffix(b.shape, a.shape)) return;
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a.shape) +
                              " vs " + shape_str(b.shape));
}

// Sums `g` over the leading axes so it collapses to `shape` (suffix).
template <class S>
typename Tensor<S>::Storage reduce_to_suffix(const typename Tensor<S>::Storage& g,
                                             Eigen::Index small_n) {
  const Eigen::Index rep = g.size() / small_n;
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      g.data(), rep, small_n);
  typename Tensor<S>::Storage out = m.colwise().sum().transpose().array();
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary ops (rhs may be a trailing-axes broadcast of lhs)
// ---------------------------------------------------------------------------

template <class S, class Fwd, class Bwd>
Var binary_op(Tape<S>& t, const char* name, Var a, Var b, Fwd fwd, Bwd bwd) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  detail::check_binary(name, av, bv);
  Tensor<S> out(av.shape);
  const Eigen::Index nb = bv.numel();
  if (nb == av.numel()) {
    fwd(av.data, bv.data, out.data);
  } else if (nb == 1) {
    const typename Tensor<S>::Storage rep_b =
        Tensor<S>::Storage::Constant(av.numel(), bv.data[0]);
    fwd(av.data, rep_b, out.data);
  } else {
    const Eigen::Index rep = av.numel() / nb;
    for (Eigen::Index r = 0; r < rep; ++r) {
      auto oseg = out.data.segment(r * nb, nb);
      typename Tensor<S>::Storage tmp(nb);
      fwd(typename Tensor<S>::Storage(av.data.segment(r * nb, nb)), bv.data, tmp);
      oseg = tmp;
    }
  }
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;  // copy: grad(a)/grad(b) may realloc
    bwd(tt, a, b, o, go);
  });
  return o;
}

template <class S>
Var add(Tape<S>& t, Var a, Var b) {
  return binary_op(
      t, "add", a, b, [](const auto& x, const auto& y, auto& o) { o = x + y; },
      [](Tape<S>& tt, Var a2, Var b2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go;
        const Eigen::Index nb = tt.val(b2).numel();
        if (nb == go.size())
          tt.grad(b2).data += go;
        else
          tt.grad(b2).data += detail::reduce_to_suffix<S>(go, nb);
      });
}

template <class S>
Var sub(Tape<S>& t, Var a, Var b) {
  return binary_op(
      t, "sub", a, b, [](const auto& x, const auto& y, auto& o) { o = x - y; },
      [](Tape<S>& tt, Var a2, Var b2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go;
        const Eigen::Index nb = tt.val(b2).numel();
        if (nb == go.size())
          tt.grad(b2).data -= go;
        else
          tt.grad(b2).data -= detail::reduce_to_suffix<S>(go, nb);
      });
}

template <class S>
Var mul(Tape<S>& t, Var a, Var b) {
  return binary_op(
      t, "mul", a, b, [](const auto& x, const auto& y, auto& o) { o = x * y; },
      [](Tape<S>& tt, Var a2, Var b2, Var, const typename Tensor<S>::Storage& go) {
        const auto& av = tt.val(a2).data;
        const auto& bv = tt.val(b2).data;
        const Eigen::Index nb = bv.size();
        if (nb == go.size()) {
          tt.grad(a2).data += go * bv;
          tt.grad(b2).data += go * av;
        } else {
          const Eigen::Index rep = go.size() / nb;
          auto& ga = tt.grad(a2).data;
          typename Tensor<S>::Storage gb_acc = Tensor<S>::zeros({static_cast<int>(nb)}).data;
          for (Eigen::Index r = 0; r < rep; ++r) {
            ga.segment(r * nb, nb) += go.segment(r * nb, nb) * bv;
            gb_acc += go.segment(r * nb, nb) * av.segment(r * nb, nb);
          }
          tt.grad(b2).data += gb_acc;
        }
      });
}

template <class S>
Var div(Tape<S>& t, Var a, Var b) {
  return binary_op(
      t, "div", a, b, [](const auto& x, const auto& y, auto& o) { o = x / y; },
      [](Tape<S>& tt, Var a2, Var b2, Var, const typename Tensor<S>::Storage& go) {
        const auto& av = tt.val(a2).data;
        const auto& bv = tt.val(b2).data;
        const Eigen::Index nb = bv.size();
        if (nb == go.size()) {
          tt.grad(a2).data += go / bv;
          tt.grad(b2).data -= go * av / (bv * bv);
        } else {
          const Eigen::Index rep = go.size() / nb;
          auto& ga = tt.grad(a2).data;
          typename Tensor<S>::Storage gb_acc = Tensor<S>::zeros({static_cast<int>(nb)}).data;
          for (Eigen::Index r = 0; r < rep; ++r) {
            ga.segment(r * nb, nb) += go.segment(r * nb, nb) / bv;
            gb_acc -= go.segment(r * nb, nb) * av.segment(r * nb, nb) / (bv * bv);
          }
          tt.grad(b2).data += gb_acc;
        }
      });
}

// ---------------------------------------------------------------------------
// elementwise unary ops
// ---------------------------------------------------------------------------

template <class S, class Fwd, class Bwd>
Var unary_op(Tape<S>& t, Var a, Fwd fwd, Bwd bwd) {
  Tensor<S> out(t.val(a).shape);
  fwd(t.val(a).data, out.data);
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    bwd(tt, a, o, go);
  });
  return o;
}

template <class S>
Var tanh(Tape<S>& t, Var a) {
  return unary_op(
      t, a, [](const auto& x, auto& o) { o = x.tanh(); },
      [](Tape<S>& tt, Var a2, Var o2, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go * (S(1) - tt.val(o2).data.square());
      });
}

template <class S>
Var relu(Tape<S>& t, Var a) {
  return unary_op(
      t, a, [](const auto& x, auto& o) { o = x.max(S(0)); },
      [](Tape<S>& tt, Var a2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go * (tt.val(a2).data > S(0)).template cast<S>();
      });
}

template <class S>
Var gelu(Tape<S>& t, Var a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  return unary_op(
      t, a,
      [&](const auto& x, auto& o) {
        o = x.unaryExpr([](S v) {
          return S(0.5) * v * (S(1) + S(std::erf(double(v) * inv_sqrt2)));
        });
      },
      [](Tape<S>& tt, Var a2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go * tt.val(a2).data.unaryExpr([](S v) {
          const double x = double(v);
          const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
          const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
          return S(cdf + x * pdf);
        });
      });
}

template <class S>
Var exp(Tape<S>& t, Var a) {
  return unary_op(
      t, a, [](const auto& x, auto& o) { o = x.exp(); },
      [](Tape<S>& tt, Var a2, Var o2, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go * tt.val(o2).data;
      });
}

template <class S>
Var log(Tape<S>& t, Var a) {
  return unary_op(
      t, a, [](const auto& x, auto& o) { o = x.log(); },
      [](Tape<S>& tt, Var a2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go / tt.val(a2).data;
      });
}

template <class S>
Var sqrt(Tape<S>& t, Var a) {
  return unary_op(
      t, a, [](const auto& x, auto& o) { o = x.sqrt(); },
      [](Tape<S>& tt, Var a2, Var o2, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go / (S(2) * tt.val(o2).data);
      });
}

template <class S>
Var abs(Tape<S>& t, Var a) {
  return unary_op(
      t, a, [](const auto& x, auto& o) { o = x.abs(); },
      [](Tape<S>& tt, Var a2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go * tt.val(a2).data.sign();
      });
}

template <class S>
Var neg(Tape<S>& t, Var a) {
  return unary_op(
      t, a, [](const auto& x, auto& o) { o = -x; },
      [](Tape<S>& tt, Var a2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data -= go;
      });
}

/// Gradient passes only strictly inside [lo, hi]; a clipped sample
/// contributes nothing, which is what the PPO clipping relies on.
template <class S>
Var clip(Tape<S>& t, Var a, S lo, S hi) {
  return unary_op(
      t, a, [&](const auto& x, auto& o) { o = x.min(hi).max(lo); },
      [lo, hi](Tape<S>& tt, Var a2, Var, const typename Tensor<S>::Storage& go) {
        const auto& x = tt.val(a2).data;
        tt.grad(a2).data += go * ((x >= lo) && (x <= hi)).template cast<S>();
      });
}

template <class S>
Var add_scalar(Tape<S>& t, Var a, S c) {
  return unary_op(
      t, a, [&](const auto& x, auto& o) { o = x + c; },
      [](Tape<S>& tt, Var a2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go;
      });
}

template <class S>
Var mul_scalar(Tape<S>& t, Var a, S c) {
  return unary_op(
      t, a, [&](const auto& x, auto& o) { o = x * c; },
      [c](Tape<S>& tt, Var a2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += go * c;
      });
}

template <class S>
Var square(Tape<S>& t, Var a) {
  return unary_op(
      t, a, [](const auto& x, auto& o) { o = x.square(); },
      [](Tape<S>& tt, Var a2, Var, const typename Tensor<S>::Storage& go) {
        tt.grad(a2).data += S(2) * go * tt.val(a2).data;
      });
}

// ---------------------------------------------------------------------------
// matmul: [M,K]@[K,N], batched [B,M,K]@[B,K,N], or leading-batched lhs with a
// shared rank-2 rhs
// ---------------------------------------------------------------------------

template <class S>
Var matmul(Tape<S>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  if (av.rank() < 2 || bv.rank() < 2)
    throw std::invalid_argument("matmul: need rank >= 2, got " + shape_str(av.shape) + " @ " +
                                shape_str(bv.shape));
  const int K = av.dim(-1);
  if (bv.dim(-2) != K)
    throw std::invalid_argument("matmul: inner dims differ, " + shape_str(av.shape) + " @ " +
                                shape_str(bv.shape));
  const int M = av.dim(-2), N = bv.dim(-1);

  if (bv.rank() == 2) {
    // shared rhs: flatten all leading axes of lhs into rows
    std::vector<int> out_shape = av.shape;
    out_shape.back() = N;
    Tensor<S> out(out_shape);
    const Eigen::Index rows = av.numel() / K;
    out.mat(rows, N).noalias() = av.mat(rows, K) * bv.mat(K, N);
    Var o{t.push(std::move(out))};
    t.record([=](Tape<S>& tt) {
      if (!tt.has_grad(o)) return;
      const Tensor<S> go = tt.grad(o);
      const auto& a2 = tt.val(a);
      const auto& b2 = tt.val(b);
      const Eigen::Index r = a2.numel() / K;
      tt.grad(a).mat(r, K).noalias() += go.mat(r, N) * b2.mat(K, N).transpose();
      tt.grad(b).mat(K, N).noalias() += a2.mat(r, K).transpose() * go.mat(r, N);
    });
    return o;
  }

  if (av.shape.size() != bv.shape.size() ||
      !std::equal(av.shape.begin(), av.shape.end() - 2, bv.shape.begin()))
    throw std::invalid_argument("matmul: batch dims differ, " + shape_str(av.shape) + " @ " +
                                shape_str(bv.shape));
  const Eigen::Index batch = av.numel() / (static_cast<Eigen::Index>(M) * K);
  std::vector<int> out_shape = av.shape;
  out_shape.back() = N;
  Tensor<S> out(out_shape);
  for (Eigen::Index i = 0; i < batch; ++i) {
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> ma(
        av.data.data() + i * M * K, M, K);
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mb(
        bv.data.data() + i * K * N, K, N);
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mo(
        out.data.data() + i * M * N, M, N);
    mo.noalias() = ma * mb;
  }
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const Tensor<S> go = tt.grad(o);
    const auto& a2 = tt.val(a);
    const auto& b2 = tt.val(b);
    auto& ga = tt.grad(a);
    auto& gb = tt.grad(b);
    for (Eigen::Index i = 0; i < batch; ++i) {
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> ma(
          a2.data.data() + i * M * K, M, K);
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mb(
          b2.data.data() + i * K * N, K, N);
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mg(
          go.data.data() + i * M * N, M, N);
      Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mga(
          ga.data.data() + i * M * K, M, K);
      Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mgb(
          gb.data.data() + i * K * N, K, N);
      mga.noalias() += mg * mb.transpose();
      mgb.noalias() += ma.transpose() * mg;
    }
  });
  return o;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class S>
Var sum_all(Tape<S>& t, Var a) {
  Tensor<S> out = Tensor<S>::scalar(t.val(a).data.sum());
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    tt.grad(a).data += tt.grad(o).data[0];
  });
  return o;
}

template <class S>
Var mean_all(Tape<S>& t, Var a) {
  const S n = S(t.val(a).numel());
  Tensor<S> out = Tensor<S>::scalar(t.val(a).data.sum() / n);
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    tt.grad(a).data += tt.grad(o).data[0] / n;
  });
  return o;
}

namespace detail {
struct AxisDims {
  Eigen::Index outer, n, inner;
};
template <class S>
AxisDims axis_dims(const Tensor<S>& x, int axis) {
  if (axis < 0) axis += x.rank();
  if (axis < 0 || axis >= x.rank())
    throw std::invalid_argument("reduction: axis out of range for " + shape_str(x.shape));
  AxisDims d{1, x.shape[static_cast<std::size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) d.outer *= x.shape[static_cast<std::size_t>(i)];
  for (int i = axis + 1; i < x.rank(); ++i) d.inner *= x.shape[static_cast<std::size_t>(i)];
  return d;
}
inline std::vector<int> drop_axis(const std::vector<int>& s, int axis) {
  if (axis < 0) axis += static_cast<int>(s.size());
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(s.size()); ++i)
    if (i != axis) out.push_back(s[static_cast<std::size_t>(i)]);
  if (out.empty()) out.push_back(1);
  return out;
}
}  // namespace detail

template <class S>
Var sum_axis(Tape<S>& t, Var a, int axis) {
  const auto& av = t.val(a);
  const auto d = detail::axis_dims(av, axis);
  Tensor<S> out(detail::drop_axis(av.shape, axis));
  out.data.setZero();
  for (Eigen::Index o2 = 0; o2 < d.outer; ++o2)
    for (Eigen::Index k = 0; k < d.n; ++k)
      out.data.segment(o2 * d.inner, d.inner) +=
          av.data.segment((o2 * d.n + k) * d.inner, d.inner);
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    auto& ga = tt.grad(a).data;
    for (Eigen::Index o2 = 0; o2 < d.outer; ++o2)
      for (Eigen::Index k = 0; k < d.n; ++k)
        ga.segment((o2 * d.n + k) * d.inner, d.inner) += go.segment(o2 * d.inner, d.inner);
  });
  return o;
}

template <class S>
Var mean_axis(Tape<S>& t, Var a, int axis) {
  const S n = S(detail::axis_dims(t.val(a), axis).n);
  return mul_scalar(t, sum_axis(t, a, axis), S(1) / n);
}

/// Max over one axis; the argmax (first maximum) receives the gradient.
template <class S>
Var max_axis(Tape<S>& t, Var a, int axis, std::vector<int>* argmax_out = nullptr) {
  const auto& av = t.val(a);
  const auto d = detail::axis_dims(av, axis);
  Tensor<S> out(detail::drop_axis(av.shape, axis));
  auto argmax = std::make_shared<std::vector<Eigen::Index>>(
      static_cast<std::size_t>(d.outer * d.inner));
  for (Eigen::Index o2 = 0; o2 < d.outer; ++o2) {
    for (Eigen::Index i = 0; i < d.inner; ++i) {
      S best = av.data[(o2 * d.n) * d.inner + i];
      Eigen::Index bk = 0;
      for (Eigen::Index k = 1; k < d.n; ++k) {
        const S v = av.data[(o2 * d.n + k) * d.inner + i];
        if (v > best) {
          best = v;
          bk = k;
        }
      }
      out.data[o2 * d.inner + i] = best;
      (*argmax)[static_cast<std::size_t>(o2 * d.inner + i)] = bk;
    }
  }
  if (argmax_out) {
    argmax_out->assign(argmax->begin(), argmax->end());
  }
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    auto& ga = tt.grad(a).data;
    for (Eigen::Index o2 = 0; o2 < d.outer; ++o2)
      for (Eigen::Index i = 0; i < d.inner; ++i) {
        const Eigen::Index k = (*argmax)[static_cast<std::size_t>(o2 * d.inner + i)];
        ga[(o2 * d.n + k) * d.inner + i] += go[o2 * d.inner + i];
      }
  });
  return o;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <class S>
Var reshape(Tape<S>& t, Var a, std::vector<int> new_shape) {
  const auto& av = t.val(a);
  Tensor<S> out(new_shape, av.data);
  if (out.numel() != av.numel())
    throw std::invalid_argument("reshape: element count mismatch " + shape_str(av.shape) +
                                " -> " + shape_str(new_shape));
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    tt.grad(a).data += tt.grad(o).data;
  });
  return o;
}

template <class S>
Var permute(Tape<S>& t, Var a, std::vector<int> perm) {
  const auto& av = t.val(a);
  const int r = av.rank();
  if (static_cast<int>(perm.size()) != r)
    throw std::invalid_argument("permute: rank mismatch for " + shape_str(av.shape));
  std::vector<int> new_shape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i)
    new_shape[static_cast<std::size_t>(i)] = av.shape[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];

  std::vector<Eigen::Index> in_strides(static_cast<std::size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i)
    in_strides[static_cast<std::size_t>(i)] =
        in_strides[static_cast<std::size_t>(i) + 1] * av.shape[static_cast<std::size_t>(i) + 1];

  auto map_index = std::make_shared<std::vector<Eigen::Index>>(static_cast<std::size_t>(av.numel()));
  Tensor<S> out(new_shape);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(r), 0);
  for (Eigen::Index flat = 0; flat < out.numel(); ++flat) {
    Eigen::Index src = 0;
    for (int i = 0; i < r; ++i)
      src += idx[static_cast<std::size_t>(i)] * in_strides[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    out.data[flat] = av.data[src];
    (*map_index)[static_cast<std::size_t>(flat)] = src;
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < new_shape[static_cast<std::size_t>(i)]) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    auto& ga = tt.grad(a).data;
    for (Eigen::Index flat = 0; flat < go.size(); ++flat)
      ga[(*map_index)[static_cast<std::size_t>(flat)]] += go[flat];
  });
  return o;
}

/// Concatenation along the last axis.
template <class S>
Var concat(Tape<S>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  if (av.rank() != bv.rank() ||
      !std::equal(av.shape.begin(), av.shape.end() - 1, bv.shape.begin()))
    throw std::invalid_argument("concat: leading shapes differ " + shape_str(av.shape) + " vs " +
                                shape_str(bv.shape));
  const Eigen::Index rows = av.leading();
  const int na = av.dim(-1), nb = bv.dim(-1);
  std::vector<int> shape = av.shape;
  shape.back() = na + nb;
  Tensor<S> out(shape);
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.data.segment(r * (na + nb), na) = av.data.segment(r * na, na);
    out.data.segment(r * (na + nb) + na, nb) = bv.data.segment(r * nb, nb);
  }
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    auto& ga = tt.grad(a).data;
    auto& gb = tt.grad(b).data;
    for (Eigen::Index r = 0; r < rows; ++r) {
      ga.segment(r * na, na) += go.segment(r * (na + nb), na);
      gb.segment(r * nb, nb) += go.segment(r * (na + nb) + na, nb);
    }
  });
  return o;
}

/// Slice of the last axis: elements [start, start+len).
template <class S>
Var slice_last(Tape<S>& t, Var a, int start, int len) {
  const auto& av = t.val(a);
  const int n = av.dim(-1);
  if (start < 0 || len <= 0 || start + len > n)
    throw std::invalid_argument("slice: range outside last axis of " + shape_str(av.shape));
  const Eigen::Index rows = av.leading();
  std::vector<int> shape = av.shape;
  shape.back() = len;
  Tensor<S> out(shape);
  for (Eigen::Index r = 0; r < rows; ++r)
    out.data.segment(r * len, len) = av.data.segment(r * n + start, len);
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    auto& ga = tt.grad(a).data;
    for (Eigen::Index r = 0; r < rows; ++r)
      ga.segment(r * n + start, len) += go.segment(r * len, len);
  });
  return o;
}

/// Materialized trailing-axes broadcast.
template <class S>
Var broadcast_to(Tape<S>& t, Var a, std::vector<int> shape) {
  const auto& av = t.val(a);
  if (!detail::is_suffix(av.shape, shape))
    throw std::invalid_argument("broadcast: " + shape_str(av.shape) + " is not a suffix of " +
                                shape_str(shape));
  Tensor<S> out(shape);
  const Eigen::Index nb = av.numel();
  const Eigen::Index rep = out.numel() / nb;
  for (Eigen::Index r = 0; r < rep; ++r) out.data.segment(r * nb, nb) = av.data;
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    tt.grad(a).data += detail::reduce_to_suffix<S>(tt.grad(o).data, nb);
  });
  return o;
}

// ---------------------------------------------------------------------------
// indexed ops: rows live on the second-to-last axis, indices are shared
// across any leading batch axes
// ---------------------------------------------------------------------------

template <class S>
Var gather_rows(Tape<S>& t, Var a, std::vector<int> idx) {
  const auto& av = t.val(a);
  if (av.rank() < 2) throw std::invalid_argument("gather: need rank >= 2, got " + shape_str(av.shape));
  const int n = av.dim(-2), d = av.dim(-1);
  for (int i : idx)
    if (i < 0 || i >= n) throw std::invalid_argument("gather: index out of range");
  const Eigen::Index batch = av.numel() / (static_cast<Eigen::Index>(n) * d);
  std::vector<int> shape = av.shape;
  shape[shape.size() - 2] = static_cast<int>(idx.size());
  Tensor<S> out(shape);
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index i = 0; i < m; ++i)
      out.data.segment((b * m + i) * d, d) =
          av.data.segment((b * n + idx[static_cast<std::size_t>(i)]) * d, d);
  auto idx_keep = std::make_shared<std::vector<int>>(std::move(idx));
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    auto& ga = tt.grad(a).data;
    for (Eigen::Index b = 0; b < batch; ++b)
      for (Eigen::Index i = 0; i < m; ++i)
        ga.segment((b * n + (*idx_keep)[static_cast<std::size_t>(i)]) * d, d) +=
            go.segment((b * m + i) * d, d);
  });
  return o;
}

/// out[..., idx[i], :] += src[..., i, :]
template <class S>
Var scatter_add(Tape<S>& t, Var src, const std::vector<int>& idx, int n_rows) {
  const auto& sv = t.val(src);
  if (sv.rank() < 2) throw std::invalid_argument("scatter_add: need rank >= 2");
  const int m = sv.dim(-2), d = sv.dim(-1);
  if (static_cast<int>(idx.size()) != m)
    throw std::invalid_argument("scatter_add: index count does not match rows");
  for (int i : idx)
    if (i < 0 || i >= n_rows) throw std::invalid_argument("scatter_add: index out of range");
  const Eigen::Index batch = sv.numel() / (static_cast<Eigen::Index>(m) * d);
  std::vector<int> shape = sv.shape;
  shape[shape.size() - 2] = n_rows;
  Tensor<S> out(shape);
  out.data.setZero();
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int i = 0; i < m; ++i)
      out.data.segment((b * n_rows + idx[static_cast<std::size_t>(i)]) * d, d) +=
          sv.data.segment((b * m + i) * d, d);
  auto idx_keep = std::make_shared<std::vector<int>>(idx);
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    auto& gs = tt.grad(src).data;
    for (Eigen::Index b = 0; b < batch; ++b)
      for (int i = 0; i < m; ++i)
        gs.segment((b * m + i) * d, d) +=
            go.segment((b * n_rows + (*idx_keep)[static_cast<std::size_t>(i)]) * d, d);
  });
  return o;
}

/// Scatter with per-row averaging; rows never referenced stay zero.
template <class S>
Var scatter_mean(Tape<S>& t, Var src, const std::vector<int>& idx, int n_rows) {
  const auto& sv = t.val(src);
  const int m = sv.dim(-2), d = sv.dim(-1);
  if (static_cast<int>(idx.size()) != m)
    throw std::invalid_argument("scatter_mean: index count does not match rows");
  std::vector<S> inv_count(static_cast<std::size_t>(n_rows), S(0));
  for (int i : idx) {
    if (i < 0 || i >= n_rows) throw std::invalid_argument("scatter_mean: index out of range");
    inv_count[static_cast<std::size_t>(i)] += S(1);
  }
  for (auto& c : inv_count) c = c > S(0) ? S(1) / c : S(0);

  const Eigen::Index batch = sv.numel() / (static_cast<Eigen::Index>(m) * d);
  std::vector<int> shape = sv.shape;
  shape[shape.size() - 2] = n_rows;
  Tensor<S> out(shape);
  out.data.setZero();
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int i = 0; i < m; ++i) {
      const int r = idx[static_cast<std::size_t>(i)];
      out.data.segment((b * n_rows + r) * d, d) +=
          sv.data.segment((b * m + i) * d, d) * inv_count[static_cast<std::size_t>(r)];
    }
  auto idx_keep = std::make_shared<std::vector<int>>(idx);
  auto ic_keep = std::make_shared<std::vector<S>>(std::move(inv_count));
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    auto& gs = tt.grad(src).data;
    for (Eigen::Index b = 0; b < batch; ++b)
      for (int i = 0; i < m; ++i) {
        const int r = (*idx_keep)[static_cast<std::size_t>(i)];
        gs.segment((b * m + i) * d, d) +=
            go.segment((b * n_rows + r) * d, d) * (*ic_keep)[static_cast<std::size_t>(r)];
      }
  });
  return o;
}

// ---------------------------------------------------------------------------
// softmax and layer norm (last axis)
// ---------------------------------------------------------------------------

template <class S>
Var softmax(Tape<S>& t, Var a) {
  const auto& av = t.val(a);
  const int n = av.dim(-1);
  const Eigen::Index rows = av.leading();
  Tensor<S> out(av.shape);
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto x = av.data.segment(r * n, n);
    const S mx = x.maxCoeff();
    typename Tensor<S>::Storage e = (x - mx).exp();
    out.data.segment(r * n, n) = e / e.sum();
  }
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    const auto& y = tt.val(o).data;
    auto& ga = tt.grad(a).data;
    for (Eigen::Index r = 0; r < rows; ++r) {
      auto ys = y.segment(r * n, n);
      auto gs = go.segment(r * n, n);
      const S dot = (gs * ys).sum();
      ga.segment(r * n, n) += ys * (gs - dot);
    }
  });
  return o;
}

template <class S>
Var layer_norm(Tape<S>& t, Var x, Var gamma, Var beta, S eps = S(1e-5)) {
  const auto& xv = t.val(x);
  const int n = xv.dim(-1);
  if (t.val(gamma).numel() != n || t.val(beta).numel() != n)
    throw std::invalid_argument("layer_norm: gamma/beta must match last axis of " +
                                shape_str(xv.shape));
  const Eigen::Index rows = xv.leading();
  Tensor<S> out(xv.shape);
  auto xhat = std::make_shared<Tensor<S>>(xv.shape);
  auto ivar = std::make_shared<std::vector<S>>(static_cast<std::size_t>(rows));
  const auto& g = t.val(gamma).data;
  const auto& b = t.val(beta).data;
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto xs = xv.data.segment(r * n, n);
    const S mu = xs.mean();
    const S var = (xs - mu).square().mean();
    const S iv = S(1) / std::sqrt(double(var + eps));
    (*ivar)[static_cast<std::size_t>(r)] = iv;
    xhat->data.segment(r * n, n) = (xs - mu) * iv;
    out.data.segment(r * n, n) = xhat->data.segment(r * n, n) * g + b;
  }
  Var o{t.push(std::move(out))};
  t.record([=](Tape<S>& tt) {
    if (!tt.has_grad(o)) return;
    const auto go = tt.grad(o).data;
    const auto& gm = tt.val(gamma).data;
    auto& gx = tt.grad(x).data;
    auto& gg = tt.grad(gamma).data;
    auto& gb = tt.grad(beta).data;
    for (Eigen::Index r = 0; r < rows; ++r) {
      auto gs = go.segment(r * n, n);
      auto xh = xhat->data.segment(r * n, n);
      const S iv = (*ivar)[static_cast<std::size_t>(r)];
      typename Tensor<S>::Storage dxh = gs * gm;
      const S mean_dxh = dxh.mean();
      const S mean_dxh_xh = (dxh * xh).mean();
      gx.segment(r * n, n) += iv * (dxh - mean_dxh - xh * mean_dxh_xh);
      gg += gs * xh;
      gb += gs;
    }
  });
  return o;
}

}  // namespace pushdyn::ad
