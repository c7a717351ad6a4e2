#include "pushdyn/rl/ppo.hpp"

#include <cstring>
#include <deque>

#include "pushdyn/chamfer.hpp"
#include "pushdyn/sampling.hpp"

namespace pushdyn::rl {

std::vector<double> gae_advantages(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   const std::vector<bool>& terminal,
                                   const std::vector<bool>& truncated,
                                   const std::vector<double>& trunc_value, double last_value,
                                   double gamma, double lambda) {
  const int n = static_cast<int>(rewards.size());
  std::vector<double> adv(static_cast<std::size_t>(n), 0.0);
  double running = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const std::size_t ti = static_cast<std::size_t>(t);
    if (terminal[ti]) {
      running = rewards[ti] - values[ti];
    } else if (truncated[ti]) {
      running = rewards[ti] + gamma * trunc_value[ti] - values[ti];
    } else {
      const double next_v = t == n - 1 ? last_value : values[ti + 1];
      const double delta = rewards[ti] + gamma * next_v - values[ti];
      running = delta + gamma * lambda * running;
    }
    adv[ti] = running;
  }
  return adv;
}

namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

// Chamfer between the obstacle clouds of two snapshots of the same scene,
// canonical sampling seeded identically on both sides. Centimeters.
double obstacle_offset_cm(const sim::SceneState& a, const sim::SceneState& b, std::uint64_t seed,
                          int pts_per_body = 64) {
  const int ti = a.target_index();
  std::vector<Eigen::Vector2d> pa, pb;
  for (std::size_t i = 0; i < a.bodies.size(); ++i) {
    if (static_cast<int>(i) == ti) continue;
    const auto canon = sample_body_points(a.bodies[i].shape, pts_per_body, 1.0,
                                          derive_seed(seed, 0x0f5ecu, i));
    for (int p = 0; p < canon.size(); ++p) {
      const Eigen::Vector2d local(canon.positions()(p, 0), canon.positions()(p, 1));
      pa.push_back(a.bodies[i].pose.apply(local));
      pb.push_back(b.bodies[i].pose.apply(local));
    }
  }
  if (pa.empty()) return 0.0;
  Eigen::MatrixX3d ma(static_cast<int>(pa.size()), 3), mb(static_cast<int>(pb.size()), 3);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ma.row(static_cast<int>(i)) << pa[i].x(), pa[i].y(), 0.0;
    mb.row(static_cast<int>(i)) << pb[i].x(), pb[i].y(), 0.0;
  }
  return 100.0 * chamfer_distance(ma, mb);
}

struct EnvSlot {
  const gen::TaskInstance* task = nullptr;
  sim::SceneState scene;
  sim::SceneState episode_start;
  Pose2 goal;
  std::shared_ptr<sim::SceneCloudRenderer> renderer;
  Eigen::Vector3d prev_action = Eigen::Vector3d::Zero();
  int steps = 0;
  int sym = 1;
  int goal_counter = 0;
  Pcg32 noise{0};
};

struct StepRecord {
  Eigen::VectorXd obs;
  wm::TokenBatch tokens;          // geometry (kept for joint-encoder updates)
  Eigen::VectorXf token_values;   // frozen-encoder outputs cached at rollout time
  Eigen::Vector3f action;
  Eigen::Vector3f old_mean;
  float old_logp = 0;
  float old_value = 0;
  float reward = 0;
  bool terminal = false;
  bool truncated = false;
  float trunc_value = 0;
};

class Runner {
 public:
  Runner(const std::vector<gen::TaskInstance>& tasks, const wm::WorldModel<float>& encoder,
         const PpoOptions& opt)
      : tasks_(tasks), opt_(opt), encoder_(encoder) {
    opt_.ppo.validate();
    opt_.reward.validate();
    opt_.schedule.validate();
    if (tasks_.empty()) throw std::invalid_argument("ppo_train: no tasks");
    const int obs_dim = kEnvStateDim;
    Pcg32 rng(derive_seed(opt_.seed, 0x9071cu));
    build_policy_params(policy_, rng, obs_dim, encoder_.cfg.dim, opt_.policy);
    if (opt_.init_policy) {
      for (auto& [name, p] : policy_.params) p.value = opt_.init_policy->at(name).value;
    }
    tok_seed_ = derive_seed(opt_.seed, 0x70c0u);

    envs_.resize(static_cast<std::size_t>(opt_.ppo.envs));
    for (int e = 0; e < opt_.ppo.envs; ++e) {
      envs_[static_cast<std::size_t>(e)].noise =
          Pcg32(derive_seed(opt_.seed, 0xac710u, static_cast<std::uint64_t>(e)));
      reset_env(e);
    }
  }

  PpoResult run() {
    PpoResult result;
    double lr = opt_.ppo.lr;
    const int total = opt_.ppo.envs * opt_.ppo.horizon;
    buffer_.resize(static_cast<std::size_t>(total));

    for (int iter = 0; iter < opt_.iterations; ++iter) {
      const double scale =
          std::min(deploy::scheduled_scale(iter, opt_.schedule), opt_.sim.action_bound);
      double reward_sum = 0.0;

      for (int t = 0; t < opt_.ppo.horizon; ++t) {
        auto [obs_t, token_batches, tokens_val] = batch_observe();
        auto [means, values, log_std] = policy_values(obs_t, tokens_val);

        for (int e = 0; e < opt_.ppo.envs; ++e) {
          EnvSlot& env = envs_[static_cast<std::size_t>(e)];
          StepRecord& rec = buffer_[static_cast<std::size_t>(t * opt_.ppo.envs + e)];
          rec.obs = obs_rows_[static_cast<std::size_t>(e)];
          rec.tokens = std::move(token_batches[static_cast<std::size_t>(e)]);
          if (!opt_.no_pretrain) {
            const Eigen::Index pd = tokens_val.numel() / opt_.ppo.envs;
            rec.token_values = Eigen::Map<const Eigen::VectorXf>(
                tokens_val.data.data() + e * pd, pd);
          }

          Eigen::Vector3f a;
          for (int d = 0; d < 3; ++d)
            a[d] = means(e, d) + std::exp(log_std[d]) * static_cast<float>(env.noise.normal());
          rec.action = a;
          rec.old_mean = means.row(e);
          rec.old_logp = host_logp(a, means.row(e), log_std);
          rec.old_value = values[static_cast<std::size_t>(e)];

          const Eigen::Vector3d exec =
              scale * a.cast<double>().cwiseMax(-1.0).cwiseMin(1.0);
          auto stepped = sim::step(env.scene, exec, opt_.sim);
          env.scene = std::move(stepped.state);
          env.steps += 1;
          env.prev_action = exec;

          const RewardBreakdown rb =
              compute_reward(env.scene, env.episode_start, env.goal, opt_.reward, opt_.sim);
          rec.reward = static_cast<float>(rb.total);
          reward_sum += rb.total;

          const bool success = rb.r_success > 0.0;
          bool dropped = false;  // any body leaving the table ends the episode
          for (const auto& b : env.scene.bodies) dropped = dropped || b.dropped;
          const bool cap = env.steps >= opt_.ppo.episode_cap;
          rec.terminal = success || dropped;
          rec.truncated = cap && !rec.terminal;
          rec.trunc_value = 0;
          if (rec.terminal || rec.truncated) {
            if (rec.truncated) rec.trunc_value = single_value(env);
            finish_episode(env, success, dropped, result);
            reset_env(e);
          }
        }
      }

      // bootstrap the horizon tail
      auto [obs_t, token_batches, tokens_val] = batch_observe();
      auto [means, values, log_std] = policy_values(obs_t, tokens_val);
      (void)means;

      const auto [advantages, returns] = compute_gae(values);
      lr = update(iter, advantages, returns, lr);

      if (opt_.debug_log && iter % 5 == 0) {
        const auto& ls = policy_.at("log_std").value.data;
        std::fprintf(stderr, "[dbg] it %d lr=%.2e log_std=(%.2f,%.2f,%.2f) kl=%.4f vloss=%.3f ret_mean=%.1f ret_std=%.1f\n",
                     iter, lr, ls[0], ls[1], ls[2], last_kl_, last_vloss_, ret_mean_, ret_std_);
      }
      CurveRow row;
      row.iteration = iter;
      row.mean_reward = reward_sum / total;
      row.success_rate = rolling_success();
      row.mean_offset_cm = rolling_offset();
      result.curve.push_back(row);
      if (opt_.on_iteration) opt_.on_iteration(row);
      result.iterations_run = iter + 1;

      if (opt_.stop_success_rate &&
          static_cast<int>(window_.size()) >= opt_.stop_min_episodes &&
          row.success_rate >= *opt_.stop_success_rate)
        break;
    }

    result.policy_params = policy_;
    result.encoder = encoder_;
    result.policy_cfg = opt_.policy;
    result.outcomes = outcomes_;
    return result;
  }

 private:
  void reset_env(int e) {
    EnvSlot& env = envs_[static_cast<std::size_t>(e)];
    const gen::TaskInstance& task = tasks_[cursor_ % tasks_.size()];
    cursor_ += 1;
    env.task = &task;
    env.scene = task.scene;
    env.episode_start = env.scene;
    const auto& cands = task.goal_candidates.empty()
                            ? std::vector<Pose2>{task.goal}
                            : task.goal_candidates;
    env.goal = cands[static_cast<std::size_t>(env.goal_counter) % cands.size()];
    env.goal_counter += 1;
    env.renderer = std::make_shared<sim::SceneCloudRenderer>(env.scene, opt_.budgets, opt_.sim,
                                                             task.seed);
    env.prev_action.setZero();
    env.steps = 0;
    const int ti = env.scene.target_index();
    env.sym = env.scene.bodies[static_cast<std::size_t>(ti)].symmetry_order;
  }

  void finish_episode(EnvSlot& env, bool success, bool dropped, PpoResult& result) {
    outcomes_.episodes += 1;
    if (success)
      outcomes_.successes += 1;
    else if (dropped)
      outcomes_.drops += 1;
    else
      outcomes_.timeouts += 1;
    const double off = obstacle_offset_cm(env.episode_start, env.scene, env.task->seed);
    window_.push_back({success, off});
    while (static_cast<int>(window_.size()) > opt_.curve_window_episodes) window_.pop_front();
    (void)result;
  }

  double rolling_success() const {
    if (window_.empty()) return 0.0;
    int s = 0;
    for (const auto& [ok, off] : window_) s += ok ? 1 : 0;
    return 100.0 * s / static_cast<double>(window_.size());
  }

  double rolling_offset() const {
    if (window_.empty()) return 0.0;
    double o = 0;
    for (const auto& [ok, off] : window_) o += off;
    return o / static_cast<double>(window_.size());
  }

  // observation pass over all envs; returns (obs tensor, token geometry, token values)
  std::tuple<Tensor<float>, std::vector<wm::TokenBatch>, Tensor<float>> batch_observe() {
    const int E = opt_.ppo.envs;
    obs_rows_.resize(static_cast<std::size_t>(E));
    std::vector<wm::TokenBatch> tbs(static_cast<std::size_t>(E));
    for (int e = 0; e < E; ++e) {
      EnvSlot& env = envs_[static_cast<std::size_t>(e)];
      SceneObs so = build_scene_obs(env.scene, *env.renderer, encoder_.cfg, opt_.mask, tok_seed_);
      obs_rows_[static_cast<std::size_t>(e)] =
          build_env_state(env.scene, env.goal, env.prev_action, opt_.privileged, opt_.sim);
      tbs[static_cast<std::size_t>(e)] = std::move(so.tokens);
    }
    Tensor<float> obs({E, kEnvStateDim});
    for (int e = 0; e < E; ++e)
      for (int d = 0; d < kEnvStateDim; ++d)
        obs.data[e * kEnvStateDim + d] = static_cast<float>(obs_rows_[static_cast<std::size_t>(e)][d]);

    std::vector<const wm::TokenBatch*> ptrs;
    for (const auto& tb : tbs) ptrs.push_back(&tb);
    Tape<float> tape;
    Tensor<float> tokens = tape.val(encoder_.encode(tape, ptrs));
    return {std::move(obs), std::move(tbs), std::move(tokens)};
  }

  std::tuple<Eigen::MatrixXf, std::vector<float>, Eigen::Vector3f> policy_values(
      const Tensor<float>& obs, const Tensor<float>& tokens) {
    Tape<float> tape;
    PolicyOut po = policy_forward(tape, policy_, tape.constant(obs), tape.constant(tokens),
                                  opt_.policy);
    const auto& mean = tape.val(po.mean);
    const auto& value = tape.val(po.value);
    const int B = mean.shape[0];
    Eigen::MatrixXf m(B, 3);
    std::vector<float> v(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
      for (int d = 0; d < 3; ++d) m(b, d) = mean.data[b * 3 + d];
      v[static_cast<std::size_t>(b)] =
          static_cast<float>(value.data[b] * ret_std_ + ret_mean_);
    }
    Eigen::Vector3f ls;
    for (int d = 0; d < 3; ++d) ls[d] = tape.val(po.log_std).data[d];
    return {std::move(m), std::move(v), ls};
  }

  static float host_logp(const Eigen::Vector3f& a, const Eigen::Vector3f& mean,
                         const Eigen::Vector3f& log_std) {
    float lp = -1.5f * std::log(2.0f * static_cast<float>(M_PI));
    for (int d = 0; d < 3; ++d) {
      const float z = (a[d] - mean[d]) / std::exp(log_std[d]);
      lp += -0.5f * z * z - log_std[d];
    }
    return lp;
  }

  float single_value(EnvSlot& env) {
    SceneObs so = build_scene_obs(env.scene, *env.renderer, encoder_.cfg, opt_.mask, tok_seed_);
    Eigen::VectorXd ob =
        build_env_state(env.scene, env.goal, env.prev_action, opt_.privileged, opt_.sim);
    Tensor<float> obs({1, kEnvStateDim});
    for (int d = 0; d < kEnvStateDim; ++d) obs.data[d] = static_cast<float>(ob[d]);
    std::vector<const wm::TokenBatch*> ptrs{&so.tokens};
    Tape<float> tape;
    Tensor<float> tokens = tape.val(encoder_.encode(tape, ptrs));
    Tape<float> tape2;
    PolicyOut po = policy_forward(tape2, policy_, tape2.constant(obs), tape2.constant(tokens),
                                  opt_.policy);
    return static_cast<float>(tape2.val(po.value).data[0] * ret_std_ + ret_mean_);
  }

  std::pair<std::vector<float>, std::vector<float>> compute_gae(const std::vector<float>& last_values) {
    const int E = opt_.ppo.envs, H = opt_.ppo.horizon;
    std::vector<float> adv(static_cast<std::size_t>(E * H)), ret(static_cast<std::size_t>(E * H));
    for (int e = 0; e < E; ++e) {
      std::vector<double> r(static_cast<std::size_t>(H)), v(static_cast<std::size_t>(H)),
          tv(static_cast<std::size_t>(H));
      std::vector<bool> term(static_cast<std::size_t>(H)), trunc(static_cast<std::size_t>(H));
      for (int t = 0; t < H; ++t) {
        const StepRecord& rec = buffer_[static_cast<std::size_t>(t * E + e)];
        r[static_cast<std::size_t>(t)] = rec.reward;
        v[static_cast<std::size_t>(t)] = rec.old_value;
        tv[static_cast<std::size_t>(t)] = rec.trunc_value;
        term[static_cast<std::size_t>(t)] = rec.terminal;
        trunc[static_cast<std::size_t>(t)] = rec.truncated;
      }
      const auto a = gae_advantages(r, v, term, trunc, tv,
                                    last_values[static_cast<std::size_t>(e)], opt_.ppo.gamma,
                                    opt_.ppo.gae_lambda);
      for (int t = 0; t < H; ++t) {
        adv[static_cast<std::size_t>(t * E + e)] = static_cast<float>(a[static_cast<std::size_t>(t)]);
        ret[static_cast<std::size_t>(t * E + e)] =
            static_cast<float>(a[static_cast<std::size_t>(t)] + v[static_cast<std::size_t>(t)]);
      }
    }
    return {std::move(adv), std::move(ret)};
  }

  double update(int iter, std::vector<float> advantages, const std::vector<float>& returns,
                double lr) {
    const int total = static_cast<int>(advantages.size());
    {
      double bm = 0, bsq = 0;
      for (float r : returns) bm += r;
      bm /= total;
      for (float r : returns) bsq += (r - bm) * (r - bm);
      const double bstd = std::sqrt(bsq / total) + 1e-6;
      if (!ret_stats_ready_) {
        ret_mean_ = bm;
        ret_std_ = bstd;
        ret_stats_ready_ = true;
      } else {
        ret_mean_ = 0.9 * ret_mean_ + 0.1 * bm;
        ret_std_ = 0.9 * ret_std_ + 0.1 * bstd;
      }
    }
    // batch-level advantage normalization
    double mean = 0, sq = 0;
    for (float a : advantages) mean += a;
    mean /= total;
    for (float a : advantages) sq += (a - mean) * (a - mean);
    const double stdev = std::sqrt(sq / total);
    for (float& a : advantages) a = static_cast<float>((a - mean) / (stdev + 1e-8));

    const float log_std_old0 = policy_.at("log_std").value.data[0];
    Eigen::Vector3f sigma_old;
    for (int d = 0; d < 3; ++d) sigma_old[d] = std::exp(policy_.at("log_std").value.data[d]);
    (void)log_std_old0;

    Pcg32 shuffle(derive_seed(opt_.seed, 0x5f1eu, static_cast<std::uint64_t>(iter)));
    const int mb_size = total / opt_.ppo.minibatches;
    double kl_sum = 0.0;
    int kl_count = 0;

    for (int epoch = 0; epoch < opt_.ppo.epochs; ++epoch) {
      std::vector<int> order(static_cast<std::size_t>(total));
      for (int i = 0; i < total; ++i) order[static_cast<std::size_t>(i)] = i;
      for (int i = total - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(shuffle.uniform_int(i + 1))]);

      for (int mb = 0; mb < opt_.ppo.minibatches; ++mb) {
        const int lo = mb * mb_size;
        const int hi = mb == opt_.ppo.minibatches - 1 ? total : lo + mb_size;
        const int M = hi - lo;
        if (M <= 0) continue;

        Tensor<float> obs({M, kEnvStateDim}), act({M, 3}), old_logp({M}), old_val({M}),
            adv({M}), ret({M});
        std::vector<const wm::TokenBatch*> tok_ptrs(static_cast<std::size_t>(M));
        Eigen::MatrixXf old_means(M, 3);
        for (int i = 0; i < M; ++i) {
          const StepRecord& rec = buffer_[static_cast<std::size_t>(order[static_cast<std::size_t>(lo + i)])];
          for (int d = 0; d < kEnvStateDim; ++d)
            obs.data[i * kEnvStateDim + d] = static_cast<float>(rec.obs[d]);
          for (int d = 0; d < 3; ++d) act.data[i * 3 + d] = rec.action[d];
          old_logp.data[i] = rec.old_logp;
          old_val.data[i] = static_cast<float>((rec.old_value - ret_mean_) / ret_std_);
          adv.data[i] = advantages[static_cast<std::size_t>(order[static_cast<std::size_t>(lo + i)])];
          ret.data[i] = static_cast<float>(
              (returns[static_cast<std::size_t>(order[static_cast<std::size_t>(lo + i)])] - ret_mean_) /
              ret_std_);
          tok_ptrs[static_cast<std::size_t>(i)] = &rec.tokens;
          old_means.row(i) = rec.old_mean;
        }

        Tape<float> tape;
        Var tokens;
        if (opt_.no_pretrain) {
          tokens = encoder_.encode_with(tape, encoder_.params, tok_ptrs);
        } else {
          // frozen encoder: reuse the token values cached during the rollout
          const int P = encoder_.cfg.total_patches(), D = encoder_.cfg.dim;
          Tensor<float> cached({M, P, D});
          for (int i = 0; i < M; ++i) {
            const StepRecord& rec =
                buffer_[static_cast<std::size_t>(order[static_cast<std::size_t>(lo + i)])];
            std::memcpy(cached.data.data() + static_cast<Eigen::Index>(i) * P * D,
                        rec.token_values.data(), sizeof(float) * static_cast<std::size_t>(P) * D);
          }
          tokens = tape.constant(std::move(cached));
        }
        PolicyOut po = policy_forward(tape, policy_, tape.constant(obs), tokens, opt_.policy);
        Var logp = gaussian_log_prob(tape, po.mean, po.log_std, tape.constant(act));
        Var ratio = ad::exp(tape, ad::sub(tape, logp, tape.constant(old_logp)));
        Var adv_v = tape.constant(adv);
        Var surr1 = ad::mul(tape, ratio, adv_v);
        Var surr2 = ad::mul(tape, ad::clip(tape, ratio, 1.0f - static_cast<float>(opt_.ppo.clip_eps),
                                           1.0f + static_cast<float>(opt_.ppo.clip_eps)),
                            adv_v);
        // min(a,b) = (a + b - |a - b|) / 2
        Var msurr = ad::mul_scalar(
            tape,
            ad::sub(tape, ad::add(tape, surr1, surr2), ad::abs(tape, ad::sub(tape, surr1, surr2))),
            0.5f);
        Var policy_loss = ad::neg(tape, ad::mean_all(tape, msurr));

        Var v = ad::reshape(tape, po.value, {M});
        Var ret_v = tape.constant(ret);
        Var value_loss;
        if (opt_.ppo.clipped_value_loss) {
          Var old_v = tape.constant(old_val);
          Var v_clipped = ad::add(
              tape, old_v,
              ad::clip(tape, ad::sub(tape, v, old_v), -static_cast<float>(opt_.ppo.clip_eps),
                       static_cast<float>(opt_.ppo.clip_eps)));
          Var e1 = ad::square(tape, ad::sub(tape, v, ret_v));
          Var e2 = ad::square(tape, ad::sub(tape, v_clipped, ret_v));
          // max(a,b) = (a + b + |a - b|) / 2
          Var mx = ad::mul_scalar(
              tape, ad::add(tape, ad::add(tape, e1, e2), ad::abs(tape, ad::sub(tape, e1, e2))),
              0.5f);
          value_loss = ad::mean_all(tape, mx);
        } else {
          value_loss = ad::mean_all(tape, ad::square(tape, ad::sub(tape, v, ret_v)));
        }

        Var entropy = gaussian_entropy(tape, po.log_std);
        Var total_loss = ad::add(
            tape, policy_loss,
            ad::sub(tape, ad::mul_scalar(tape, value_loss, static_cast<float>(opt_.ppo.value_loss_coef)),
                    ad::mul_scalar(tape, entropy, static_cast<float>(opt_.ppo.entropy_coef))));

        const float loss_val = tape.val(total_loss).item();
        last_vloss_ = double(tape.val(value_loss).item());
        if (!std::isfinite(loss_val))
          throw PpoDivergence("ppo_train: non-finite loss at iteration " + std::to_string(iter) +
                              ", epoch " + std::to_string(epoch));

        // mean Gaussian KL against the rollout policy, for the adaptive lr
        if (opt_.ppo.adaptive_lr && opt_.ppo.desired_kl > 0) {
          const auto& mean_new = tape.val(po.mean);
          Eigen::Vector3f sigma_new;
          for (int d = 0; d < 3; ++d) sigma_new[d] = std::exp(tape.val(po.log_std).data[d]);
          double kl = 0.0;
          for (int i = 0; i < M; ++i)
            for (int d = 0; d < 3; ++d) {
              const double mo = old_means(i, d), mn = mean_new.data[i * 3 + d];
              const double so = sigma_old[d], sn = sigma_new[d];
              kl += std::log(sn / so) + (so * so + (mo - mn) * (mo - mn)) / (2 * sn * sn) - 0.5;
            }
          kl /= M;
          kl_sum += kl;
          kl_count += 1;
          last_kl_ = kl;
          // per-update adjustment; kl == 0 (first minibatch, identical
          // params) counts as "too small" so the rate can recover upward
          if (kl > 2.0 * opt_.ppo.desired_kl)
            lr = std::max(1e-5, lr / 1.5);
          else if (kl < 0.5 * opt_.ppo.desired_kl)
            lr = std::min(1e-2, lr * 1.5);
        }

        policy_.zero_grads();
        if (opt_.no_pretrain) encoder_.params.zero_grads();
        tape.backward(total_loss);

        double norm_sq = 0.0;
        for (const auto& [k, p] : policy_.params) norm_sq += double(p.grad.data.square().sum());
        if (opt_.no_pretrain)
          for (const auto& [k, p] : encoder_.params.params)
            norm_sq += double(p.grad.data.square().sum());
        const double norm = std::sqrt(norm_sq);
        if (norm > opt_.ppo.max_grad_norm && norm > 0) {
          const float s = static_cast<float>(opt_.ppo.max_grad_norm / norm);
          for (auto& [k, p] : policy_.params) p.grad.data *= s;
          if (opt_.no_pretrain)
            for (auto& [k, p] : encoder_.params.params) p.grad.data *= s;
        }

        ad::AdamConfig<float> acfg;
        acfg.lr = static_cast<float>(lr);
        ad::adam_step(policy_, adam_policy_, acfg);
        if (opt_.no_pretrain) ad::adam_step(encoder_.params, adam_wm_, acfg);
      }
    }
    (void)kl_sum;
    (void)kl_count;
    return lr;
  }

  const std::vector<gen::TaskInstance>& tasks_;
  PpoOptions opt_;
  wm::WorldModel<float> encoder_;
  ad::ParamTree<float> policy_;
  ad::AdamState<float> adam_policy_, adam_wm_;
  std::vector<EnvSlot> envs_;
  std::vector<StepRecord> buffer_;
  std::vector<Eigen::VectorXd> obs_rows_;
  std::deque<std::pair<bool, double>> window_;
  EpisodeOutcomeStats outcomes_;
  // running return statistics; the critic learns normalized values so the
  // sparse success spike cannot blow up the shared trunk
  double ret_mean_ = 0.0;
  double ret_std_ = 1.0;
  bool ret_stats_ready_ = false;
  double last_kl_ = 0.0;
  double last_vloss_ = 0.0;
  std::size_t cursor_ = 0;
  std::uint64_t tok_seed_ = 0;
};

}  // namespace

PpoResult ppo_train(const std::vector<gen::TaskInstance>& tasks,
                    const wm::WorldModel<float>& encoder, const PpoOptions& opt) {
  Runner runner(tasks, encoder, opt);
  return runner.run();
}

}  // namespace pushdyn::rl
