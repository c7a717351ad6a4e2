#include "pushdyn/wm/train.hpp"

#include <algorithm>

#include "pushdyn/chamfer.hpp"

namespace pushdyn::wm {

namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

struct Prepared {
  PhysPointCloud cloud;  // masked input
  TokenBatch tokens;
  Eigen::MatrixX3d target_pos;  // raw
  Eigen::MatrixX3d target_vel;
  std::vector<int> point_body;
  Eigen::Vector3d action;
};

Prepared prepare(const WmSample& s, const WMConfig& cfg, const WmTrainConfig& tc,
                 std::uint64_t tokenize_seed) {
  Prepared p;
  p.cloud = tc.mask.any() ? apply_channel_mask(s.cloud, tc.mask) : s.cloud;
  p.tokens = tokenize(p.cloud, cfg, tokenize_seed);
  if (tc.pretext == Pretext::Reconstruction) {
    p.target_pos = s.cloud.positions();
    p.target_vel = s.cloud.velocities();
  } else {
    p.target_pos = s.next_positions;
    p.target_vel = s.next_velocities;
  }
  p.point_body = s.point_body;
  p.action = s.action;
  return p;
}

// Flattened per-body mean supervision for the object-level ablation.
struct ObjectTargets {
  std::vector<int> gather_idx;   // flattened point rows that belong to a body
  std::vector<int> scatter_idx;  // flattened body row for each gathered point
  int n_rows = 0;
  Eigen::MatrixX3d mean_pos;
  Eigen::MatrixX3d mean_vel;
};

ObjectTargets object_targets(const std::vector<const Prepared*>& batch) {
  ObjectTargets out;
  int row_base = 0;
  std::vector<Eigen::Vector3d> mp, mv;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Prepared& p = *batch[b];
    const int n = p.cloud.size();
    int max_body = -1;
    for (int i = 0; i < n; ++i) max_body = std::max(max_body, p.point_body.empty() ? -1 : p.point_body[static_cast<std::size_t>(i)]);
    std::vector<Eigen::Vector3d> sum_p(static_cast<std::size_t>(max_body + 1), Eigen::Vector3d::Zero());
    std::vector<Eigen::Vector3d> sum_v(static_cast<std::size_t>(max_body + 1), Eigen::Vector3d::Zero());
    std::vector<int> cnt(static_cast<std::size_t>(max_body + 1), 0);
    for (int i = 0; i < n; ++i) {
      const int body = p.point_body.empty() ? -1 : p.point_body[static_cast<std::size_t>(i)];
      if (body < 0) continue;
      out.gather_idx.push_back(static_cast<int>(b) * n + i);
      out.scatter_idx.push_back(row_base + body);
      sum_p[static_cast<std::size_t>(body)] += p.target_pos.row(i).transpose();
      sum_v[static_cast<std::size_t>(body)] += p.target_vel.row(i).transpose();
      cnt[static_cast<std::size_t>(body)] += 1;
    }
    for (int body = 0; body <= max_body; ++body) {
      const double c = std::max(1, cnt[static_cast<std::size_t>(body)]);
      mp.push_back(sum_p[static_cast<std::size_t>(body)] / c);
      mv.push_back(sum_v[static_cast<std::size_t>(body)] / c);
    }
    row_base += max_body + 1;
  }
  out.n_rows = row_base;
  out.mean_pos.resize(row_base, 3);
  out.mean_vel.resize(row_base, 3);
  for (int r = 0; r < row_base; ++r) {
    out.mean_pos.row(r) = mp[static_cast<std::size_t>(r)].transpose();
    out.mean_vel.row(r) = mv[static_cast<std::size_t>(r)].transpose();
  }
  return out;
}

}  // namespace

WmTrainResult train_world_model(const std::vector<WmSample>& samples, const WMConfig& cfg,
                                const WmTrainConfig& tc, const WorldModel<float>* warm_start) {
  if (samples.empty()) throw std::invalid_argument("train_world_model: empty dataset");
  cfg.validate();

  WmTrainResult out;
  out.model = warm_start ? *warm_start : WorldModel<float>::init(cfg, tc.seed);
  WorldModel<float>& model = out.model;
  if (warm_start) model.cfg = cfg;  // loss weights may be overridden per run

  // deterministic held-out split
  const int stride = std::max(2, static_cast<int>(std::lround(1.0 / std::max(1e-9, tc.heldout_frac))));
  std::vector<int> train_idx, held_idx;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i)
    ((i % stride == stride - 1) ? held_idx : train_idx).push_back(i);
  if (train_idx.empty()) train_idx.push_back(0);

  // running input statistics over (masked) training clouds
  for (int i : train_idx)
    model.stats = update_running_stats(
        model.stats, tc.mask.any() ? apply_channel_mask(samples[static_cast<std::size_t>(i)].cloud, tc.mask)
                                   : samples[static_cast<std::size_t>(i)].cloud);

  // one tokenize seed per run: patching is a deterministic function of the cloud
  std::vector<Prepared> prepared;
  prepared.reserve(samples.size());
  const std::uint64_t tok_seed = derive_seed(tc.seed, 0x70c0u);
  for (std::size_t i = 0; i < samples.size(); ++i)
    prepared.push_back(prepare(samples[i], cfg, tc, tok_seed));

  ad::AdamState<float> adam;
  Pcg32 rng(derive_seed(tc.seed, 0x5489u));

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double frac = tc.epochs > 1 ? double(epoch) / double(tc.epochs - 1) : 0.0;
    const double lr = tc.lr_min + 0.5 * (tc.lr - tc.lr_min) * (1.0 + std::cos(M_PI * frac));
    ad::AdamConfig<float> acfg;
    acfg.lr = static_cast<float>(lr);

    std::vector<int> order = train_idx;
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);

    WmEpochMetrics em;
    em.epoch = epoch;
    int batches = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(tc.batch)) {
      std::vector<const Prepared*> batch;
      std::vector<const TokenBatch*> toks;
      for (std::size_t i = pos; i < std::min(order.size(), pos + static_cast<std::size_t>(tc.batch)); ++i) {
        batch.push_back(&prepared[static_cast<std::size_t>(order[i])]);
        toks.push_back(&batch.back()->tokens);
      }
      const int B = static_cast<int>(batch.size());
      Eigen::Matrix<double, Eigen::Dynamic, 3> actions(B, 3);
      std::vector<Eigen::MatrixX3d> tpos, tvel;
      for (int b = 0; b < B; ++b) {
        actions.row(b) = batch[static_cast<std::size_t>(b)]->action.transpose();
        tpos.push_back(batch[static_cast<std::size_t>(b)]->target_pos);
        tvel.push_back(batch[static_cast<std::size_t>(b)]->target_vel);
      }

      Tape<float> tape;
      Var latent = model.encode(tape, toks);
      auto decoded = model.decode(tape, latent, toks, actions);

      WmLoss<float> loss;
      if (tc.granularity == Granularity::Object) {
        const ObjectTargets ot = object_targets(batch);
        const int N = batch.front()->cloud.size();
        Var flat_p = ad::reshape(tape, decoded.positions, {B * N, 3});
        Var flat_v = ad::reshape(tape, decoded.velocities, {B * N, 3});
        Var body_p = ad::scatter_mean(tape, ad::gather_rows(tape, flat_p, ot.gather_idx),
                                      ot.scatter_idx, ot.n_rows);
        Var body_v = ad::scatter_mean(tape, ad::gather_rows(tape, flat_v, ot.gather_idx),
                                      ot.scatter_idx, ot.n_rows);
        DecodedDyn<float> body_pred;
        body_pred.positions = ad::reshape(tape, body_p, {1, ot.n_rows, 3});
        body_pred.velocities = ad::reshape(tape, body_v, {1, ot.n_rows, 3});
        loss = model.loss(tape, body_pred, model.normalize_targets_pos({ot.mean_pos}),
                          model.normalize_targets_vel({ot.mean_vel}));
      } else {
        loss = model.loss(tape, decoded, model.normalize_targets_pos(tpos),
                          model.normalize_targets_vel(tvel));
      }

      model.params.zero_grads();
      tape.backward(loss.total);
      ad::clip_grad_norm(model.params, 10.0);
      ad::adam_step(model.params, adam, acfg);

      em.l_pos += double(tape.val(loss.pos).item());
      em.l_vel += double(tape.val(loss.vel).item());
      em.l_var += double(tape.val(loss.var).item());
      batches += 1;
    }
    em.l_pos /= std::max(1, batches);
    em.l_vel /= std::max(1, batches);
    em.l_var /= std::max(1, batches);

    // held-out Chamfer position error, cm
    double chamfer_sum = 0.0;
    int chamfer_n = 0;
    for (int i : held_idx) {
      const Prepared& p = prepared[static_cast<std::size_t>(i)];
      Tape<float> tape;
      std::vector<const TokenBatch*> toks{&p.tokens};
      Eigen::Matrix<double, Eigen::Dynamic, 3> act(1, 3);
      act.row(0) = p.action.transpose();
      auto decoded = model.decode(tape, model.encode(tape, toks), toks, act);
      const Eigen::MatrixX3d pred = model.denormalize_positions(tape.val(decoded.positions), 0);
      chamfer_sum += chamfer_distance(pred, p.target_pos);
      chamfer_n += 1;
    }
    em.heldout_chamfer_cm = chamfer_n > 0 ? 100.0 * chamfer_sum / chamfer_n : 0.0;
    out.metrics.push_back(em);
  }
  return out;
}

DynPredictionRaw predict(const WorldModel<float>& model, const PhysPointCloud& cloud,
                         const Eigen::Vector3d& action, std::uint64_t tokenize_seed) {
  TokenBatch tokens = tokenize(cloud, model.cfg, tokenize_seed);
  std::vector<const TokenBatch*> toks{&tokens};
  Tape<float> tape;
  Eigen::Matrix<double, Eigen::Dynamic, 3> act(1, 3);
  act.row(0) = action.transpose();
  auto decoded = model.decode(tape, model.encode(tape, toks), toks, act);
  DynPredictionRaw out;
  out.positions = model.denormalize_positions(tape.val(decoded.positions), 0);
  out.velocities = model.denormalize_velocities(tape.val(decoded.velocities), 0);
  return out;
}

double heldout_chamfer_cm(const WorldModel<float>& model, const std::vector<WmSample>& samples,
                          const ChannelMask& mask, std::uint64_t tokenize_seed) {
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PhysPointCloud cloud =
        mask.any() ? apply_channel_mask(samples[i].cloud, mask) : samples[i].cloud;
    const auto pred = predict(model, cloud, samples[i].action, tokenize_seed);
    sum += chamfer_distance(pred.positions, samples[i].next_positions);
  }
  return samples.empty() ? 0.0 : 100.0 * sum / double(samples.size());
}

}  // namespace pushdyn::wm
