#pragma once

#include <json.hpp>

#include "pushdyn/ad/adam.hpp"
#include "pushdyn/ad/checkpoint.hpp"
#include "pushdyn/ad/nn.hpp"
#include "pushdyn/wm/tokenizer.hpp"

namespace pushdyn::wm {

/// Input-channel ablation switches (zeroed before tokenization).
struct ChannelMask {
  bool velocity = false;  // zero vx, vy, vz
  bool phys = false;      // zero the mass channel

  bool any() const { return velocity || phys; }
};

inline PhysPointCloud apply_channel_mask(PhysPointCloud cloud, const ChannelMask& mask) {
  if (mask.phys) cloud.feats.col(3).setZero();
  if (mask.velocity) cloud.feats.rightCols<3>().setZero();
  return cloud;
}

/// Sinusoidal embedding of raw patch centers: interleaved sin/cos per axis,
/// floor(D/6) geometric frequency bands from 1 to 100 cycles/meter, zero-pad
/// for the remainder.
template <class S>
ad::Tensor<S> sinusoidal_center_embedding(const Eigen::MatrixX3d& centers, int dim) {
  const int P = static_cast<int>(centers.rows());
  const int bands = dim / 6;
  ad::Tensor<S> out({P, dim});
  out.data.setZero();
  if (bands == 0) return out;
  for (int p = 0; p < P; ++p) {
    for (int a = 0; a < 3; ++a) {
      const double c = centers(p, a);
      for (int j = 0; j < bands; ++j) {
        const double freq = bands > 1 ? std::pow(100.0, double(j) / double(bands - 1)) : 1.0;
        const double arg = 2.0 * M_PI * freq * c;
        out.data[p * dim + (a * 2 * bands + 2 * j)] = S(std::sin(arg));
        out.data[p * dim + (a * 2 * bands + 2 * j + 1)] = S(std::cos(arg));
      }
    }
  }
  return out;
}

template <class S>
struct DecodedDyn {
  ad::Var positions;   // [B, N, 3], normalized space
  ad::Var velocities;  // [B, N, 3], normalized space
};

template <class S>
struct WmLoss {
  ad::Var total, pos, vel, var;
};

/// The physical world model: patch encoder + ViT trunk (the dynamics
/// representation), and an action-conditioned decoder with per-point heads.
template <class S>
struct WorldModel {
  WMConfig cfg;
  NormStats stats;
  ad::ParamTree<S> params;

  static WorldModel init(const WMConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    WorldModel m;
    m.cfg = cfg;
    Pcg32 rng(derive_seed(seed, 0x3d0de1u));
    build_params(m.params, rng, cfg);
    return m;
  }

  static void build_params(ad::ParamTree<S>& tree, Pcg32& rng, const WMConfig& cfg) {
    const int D = cfg.dim;
    ad::create_linear(tree, rng, "enc/pmlp/l0", kCloudChannels, D);
    ad::create_linear(tree, rng, "enc/pmlp/l1", D, D);
    ad::create_linear(tree, rng, "enc/proj", D, D);
    for (int b = 0; b < cfg.blocks; ++b)
      ad::create_transformer_block(tree, rng, "enc/blk" + std::to_string(b), D);
    ad::create_layer_norm(tree, "enc/ln", D);

    ad::create_linear(tree, rng, "dec/action", 3, D);
    ad::create_transformer_block(tree, rng, "dec/fuse", D);
    ad::create_mlp(tree, rng, "dec/offset", 3, {D}, D);
    ad::create_mlp(tree, rng, "dec/pos", D, {D}, 3);
    ad::create_mlp(tree, rng, "dec/vel", D, {D}, 3);
  }

  /// Number of parameters in the encoder (dynamics representation) half.
  static bool is_encoder_param(const std::string& name) { return name.rfind("enc/", 0) == 0; }

  /// Patch features -> latent tokens f_dy, shape [B, P, D].
  /// Runs on any ParamTree with the model layout (callers pass `params` or a
  /// jointly-trained copy).
  ad::Var encode(ad::Tape<S>& t, const std::vector<const TokenBatch*>& batch) const {
    return encode_with(t, const_cast<ad::ParamTree<S>&>(params), batch);
  }

  ad::Var encode_with(ad::Tape<S>& t, ad::ParamTree<S>& tree,
                      const std::vector<const TokenBatch*>& batch) const {
    const int B = static_cast<int>(batch.size());
    const int P = cfg.total_patches(), K = cfg.k, D = cfg.dim;
    ad::Tensor<S> feats({B, P, K, kCloudChannels});
    ad::Tensor<S> posemb({B, P, D});
    const auto mean = stats.mean;
    const auto std = stats.std();
    for (int b = 0; b < B; ++b) {
      const TokenBatch& tb = *batch[static_cast<std::size_t>(b)];
      if (tb.patches() != P || tb.member_feats.rows() != static_cast<Eigen::Index>(P) * K)
        throw std::invalid_argument("encode: token batch does not match the configured layout");
      for (Eigen::Index r = 0; r < tb.member_feats.rows(); ++r) {
        for (int c = 0; c < kCloudChannels; ++c) {
          const double v = tb.member_feats(r, c);
          // positions are center-relative: scale only; other channels shift+scale
          const double n = c < 3 ? v / std[c] : (v - mean[c]) / std[c];
          feats.data[((static_cast<Eigen::Index>(b) * P * K) + r) * kCloudChannels + c] = S(n);
        }
      }
      ad::Tensor<S> pe = sinusoidal_center_embedding<S>(tb.centers, D);
      posemb.data.segment(static_cast<Eigen::Index>(b) * P * D, static_cast<Eigen::Index>(P) * D) =
          pe.data;
    }

    ad::Var x = t.constant(std::move(feats));
    x = ad::gelu(t, ad::linear(t, tree, "enc/pmlp/l0", x));
    x = ad::gelu(t, ad::linear(t, tree, "enc/pmlp/l1", x));
    x = ad::max_axis(t, x, 2);                       // pool members -> [B, P, D]
    x = ad::linear(t, tree, "enc/proj", x);
    x = ad::add(t, x, t.constant(std::move(posemb)));
    for (int blk = 0; blk < cfg.blocks; ++blk)
      x = ad::transformer_block(t, tree, "enc/blk" + std::to_string(blk), x, cfg.heads);
    return ad::layer_norm(t, tree, "enc/ln", x);
  }

  /// Action-conditioned decoding back to per-point positions/velocities
  /// (normalized space). Actions are raw end-effector flows, one row each.
  DecodedDyn<S> decode(ad::Tape<S>& t, ad::Var latent,
                       const std::vector<const TokenBatch*>& batch,
                       const Eigen::Matrix<double, Eigen::Dynamic, 3>& actions) const {
    return decode_with(t, const_cast<ad::ParamTree<S>&>(params), latent, batch, actions);
  }

  DecodedDyn<S> decode_with(ad::Tape<S>& t, ad::ParamTree<S>& tree, ad::Var latent,
                            const std::vector<const TokenBatch*>& batch,
                            const Eigen::Matrix<double, Eigen::Dynamic, 3>& actions) const {
    const int B = static_cast<int>(batch.size());
    const int P = cfg.total_patches(), D = cfg.dim;
    const int N = batch.front()->n_points;
    if (actions.rows() != B) throw std::invalid_argument("decode: action count != batch size");

    ad::Tensor<S> act({B, 3});
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < 3; ++c) act.data[b * 3 + c] = S(actions(b, c));
    ad::Var a_tok = ad::linear(t, tree, "dec/action", t.constant(std::move(act)));
    a_tok = ad::reshape(t, a_tok, {B, 1, D});
    ad::Var cond = ad::transformer_block(t, tree, "dec/fuse", latent, cfg.heads, a_tok);

    // flatten the batch for one shared scatter over combined pair lists
    std::vector<int> pair_patch, pair_point;
    Eigen::Index total_pairs = 0;
    for (int b = 0; b < B; ++b)
      total_pairs += static_cast<Eigen::Index>(batch[static_cast<std::size_t>(b)]->pair_point.size());
    pair_patch.reserve(static_cast<std::size_t>(total_pairs));
    pair_point.reserve(static_cast<std::size_t>(total_pairs));
    ad::Tensor<S> offsets({static_cast<int>(total_pairs), 3});
    const auto std = stats.std();
    Eigen::Index row = 0;
    for (int b = 0; b < B; ++b) {
      const TokenBatch& tb = *batch[static_cast<std::size_t>(b)];
      if (tb.n_points != N) throw std::invalid_argument("decode: inconsistent point counts");
      for (std::size_t i = 0; i < tb.pair_point.size(); ++i) {
        pair_patch.push_back(b * P + tb.pair_patch[i]);
        pair_point.push_back(b * N + tb.pair_point[i]);
        // offsets relative to patch centers, scaled like encoder positions
        for (int c = 0; c < 3; ++c)
          offsets.data[row * 3 + c] = S(tb.pair_offset[i][c] / std[c]);
        row += 1;
      }
    }

    ad::Var flat_tokens = ad::reshape(t, cond, {B * P, D});
    ad::Var patch_feats = ad::gather_rows(t, flat_tokens, pair_patch);  // [M, D]
    ad::Var off_emb = ad::mlp(t, tree, "dec/offset", t.constant(std::move(offsets)), {D}, ad::Act::Gelu);
    ad::Var fused = ad::add(t, patch_feats, off_emb);
    ad::Var point_feats = ad::scatter_mean(t, fused, pair_point, B * N);  // [B*N, D]

    DecodedDyn<S> out;
    out.positions = ad::reshape(t, ad::mlp(t, tree, "dec/pos", point_feats, {D}, ad::Act::Gelu), {B, N, 3});
    out.velocities = ad::reshape(t, ad::mlp(t, tree, "dec/vel", point_feats, {D}, ad::Act::Gelu), {B, N, 3});
    return out;
  }

  /// Dispersion-aware training objective in normalized space. Targets are
  /// per-point next-frame positions/velocities stacked [B, N, 3].
  WmLoss<S> loss(ad::Tape<S>& t, const DecodedDyn<S>& pred, const ad::Tensor<S>& target_pos,
                 const ad::Tensor<S>& target_vel) const {
    WmLoss<S> out;
    ad::Var tp = t.constant(target_pos);
    ad::Var tv = t.constant(target_vel);
    out.pos = ad::mean_all(t, ad::square(t, ad::sub(t, pred.positions, tp)));
    out.vel = ad::mean_all(t, ad::square(t, ad::sub(t, pred.velocities, tv)));

    const int B = target_vel.shape[0], N = target_vel.shape[1];
    ad::Var flat = ad::reshape(t, pred.velocities, {B * N, 3});
    ad::Var mean_v = ad::mean_axis(t, flat, 0);                       // [3]
    ad::Var var_pred = ad::sub(t, ad::mean_axis(t, ad::square(t, flat), 0),
                               ad::square(t, mean_v));                // [3]

    Eigen::Matrix<double, 3, 1> tmean = Eigen::Matrix<double, 3, 1>::Zero();
    Eigen::Matrix<double, 3, 1> tsq = Eigen::Matrix<double, 3, 1>::Zero();
    for (Eigen::Index i = 0; i < target_vel.numel() / 3; ++i)
      for (int c = 0; c < 3; ++c) {
        tmean[c] += double(target_vel.data[i * 3 + c]);
        tsq[c] += double(target_vel.data[i * 3 + c]) * double(target_vel.data[i * 3 + c]);
      }
    tmean /= double(target_vel.numel() / 3);
    tsq /= double(target_vel.numel() / 3);
    ad::Tensor<S> tvar({3});
    for (int c = 0; c < 3; ++c) tvar.data[c] = S(tsq[c] - tmean[c] * tmean[c]);

    if (cfg.var_matches_std) {
      ad::Tensor<S> tstd({3});
      for (int c = 0; c < 3; ++c) tstd.data[c] = S(std::sqrt(std::max(0.0, double(tvar.data[c]))));
      ad::Var std_pred = ad::sqrt(t, ad::add_scalar(t, var_pred, S(1e-12)));
      out.var = ad::sqrt(t, ad::add_scalar(t, ad::sum_all(t, ad::square(t, ad::sub(t, std_pred, t.constant(tstd)))), S(1e-20)));
    } else {
      out.var = ad::sum_all(t, ad::abs(t, ad::sub(t, var_pred, t.constant(tvar))));
    }

    ad::Var total = ad::mul_scalar(t, out.pos, S(cfg.lambda_pos));
    total = ad::add(t, total, ad::mul_scalar(t, out.vel, S(cfg.lambda_vel)));
    total = ad::add(t, total, ad::mul_scalar(t, out.var, S(cfg.lambda_var)));
    out.total = total;
    return out;
  }

  // --- normalization helpers -------------------------------------------------

  /// Stacks normalized per-point targets for a batch.
  ad::Tensor<S> normalize_targets_pos(const std::vector<Eigen::MatrixX3d>& pos) const {
    return normalize_block(pos, 0);
  }
  ad::Tensor<S> normalize_targets_vel(const std::vector<Eigen::MatrixX3d>& vel) const {
    return normalize_block(vel, 4);
  }

  Eigen::MatrixX3d denormalize_positions(const ad::Tensor<S>& block, int b) const {
    return denormalize_block(block, b, 0);
  }
  Eigen::MatrixX3d denormalize_velocities(const ad::Tensor<S>& block, int b) const {
    return denormalize_block(block, b, 4);
  }

  ad::Checkpoint to_checkpoint(const std::string& extra_json = "{}") const {
    ad::Checkpoint ck;
    nlohmann::json j;
    j["type"] = "worldmodel";
    j["wm"] = {{"patches_target", cfg.patches_target}, {"patches_obstacle", cfg.patches_obstacle},
               {"patches_ee", cfg.patches_ee},         {"k", cfg.k},
               {"dim", cfg.dim},                       {"blocks", cfg.blocks},
               {"heads", cfg.heads},                   {"dt", cfg.dt},
               {"lambda_pos", cfg.lambda_pos},         {"lambda_vel", cfg.lambda_vel},
               {"lambda_var", cfg.lambda_var},         {"var_matches_std", cfg.var_matches_std}};
    j["stats"] = {{"mean", std::vector<double>(stats.mean.data(), stats.mean.data() + 7)},
                  {"m2", std::vector<double>(stats.m2.data(), stats.m2.data() + 7)},
                  {"count", stats.count},
                  {"epsilon", stats.epsilon}};
    j["extra"] = nlohmann::json::parse(extra_json);
    ck.config_json = j.dump();
    ck.params = params.template cast<float>();
    return ck;
  }

  static WorldModel from_checkpoint(const ad::Checkpoint& ck) {
    const auto j = nlohmann::json::parse(ck.config_json);
    if (j.at("type").get<std::string>() != "worldmodel")
      throw std::runtime_error("checkpoint is not a world model");
    WorldModel m;
    const auto& w = j.at("wm");
    m.cfg.patches_target = w.at("patches_target").get<int>();
    m.cfg.patches_obstacle = w.at("patches_obstacle").get<int>();
    m.cfg.patches_ee = w.at("patches_ee").get<int>();
    m.cfg.k = w.at("k").get<int>();
    m.cfg.dim = w.at("dim").get<int>();
    m.cfg.blocks = w.at("blocks").get<int>();
    m.cfg.heads = w.at("heads").get<int>();
    m.cfg.dt = w.at("dt").get<double>();
    m.cfg.lambda_pos = w.at("lambda_pos").get<double>();
    m.cfg.lambda_vel = w.at("lambda_vel").get<double>();
    m.cfg.lambda_var = w.at("lambda_var").get<double>();
    m.cfg.var_matches_std = w.at("var_matches_std").get<bool>();
    const auto& st = j.at("stats");
    for (int c = 0; c < 7; ++c) {
      m.stats.mean[c] = st.at("mean").at(static_cast<std::size_t>(c)).get<double>();
      m.stats.m2[c] = st.at("m2").at(static_cast<std::size_t>(c)).get<double>();
    }
    m.stats.count = st.at("count").get<std::int64_t>();
    m.stats.epsilon = st.at("epsilon").get<double>();
    m.params = ck.params.template cast<S>();
    return m;
  }

 private:
  ad::Tensor<S> normalize_block(const std::vector<Eigen::MatrixX3d>& rows, int ch0) const {
    const int B = static_cast<int>(rows.size());
    const int N = static_cast<int>(rows.front().rows());
    const auto mean = stats.mean;
    const auto std = stats.std();
    ad::Tensor<S> out({B, N, 3});
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < N; ++i)
        for (int c = 0; c < 3; ++c)
          out.data[(static_cast<Eigen::Index>(b) * N + i) * 3 + c] =
              S((rows[static_cast<std::size_t>(b)](i, c) - mean[ch0 + c]) / std[ch0 + c]);
    return out;
  }

  Eigen::MatrixX3d denormalize_block(const ad::Tensor<S>& block, int b, int ch0) const {
    const int N = block.shape[1];
    const auto mean = stats.mean;
    const auto std = stats.std();
    Eigen::MatrixX3d out(N, 3);
    for (int i = 0; i < N; ++i)
      for (int c = 0; c < 3; ++c)
        out(i, c) = double(block.data[(static_cast<Eigen::Index>(b) * N + i) * 3 + c]) * std[ch0 + c] +
                    mean[ch0 + c];
    return out;
  }
};

}  // namespace pushdyn::wm
