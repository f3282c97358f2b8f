#include "pivot/ppo.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pivot/errors.h"
#include "pivot/hash.h"
#include "pivot/parallel.h"

namespace pivot {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr uint64_t kTrainEvalSeed = 999;

// Fixed affine input scaling bringing each feature to order one: positions
// in decimeters, displacements in units of 5 cm, angles about 150 degrees.
constexpr std::array<double, 9> kFeatureOffset = {0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.5, 2.618, 2.618};
constexpr std::array<double, 9> kFeatureScale = {10.0, 10.0, 1.0, 20.0, 20.0, 2.0, 2.0, 2.0, 2.0};

std::array<float, kActionDim> std_of(const std::array<float, kActionDim>& log_std) {
  std::array<float, kActionDim> s{};
  for (int j = 0; j < kActionDim; ++j) s[j] = std::exp(log_std[j]);
  return s;
}

std::string format_row(int64_t step, int64_t episodes, const EvalSummary& s, double wall) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%.6f,%.6f,%.6f,%.3f\n", static_cast<long long>(step),
                static_cast<long long>(episodes), s.mean_reward, s.success_rate, s.mean_deviation,
                wall);
  return buf;
}

}  // namespace

void PpoConfig::validate() const {
  if (!(clip > 0.0)) throw ConfigError("train.clip must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train.gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("train.gae_lambda must lie in [0, 1]");
  if (n_envs <= 0 || n_steps <= 0 || minibatch <= 0 || epochs <= 0)
    throw ConfigError("train sizes must be positive");
  if (batch_size() % minibatch != 0)
    throw ConfigError("train.minibatch must divide n_envs * n_steps");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (max_grad_norm <= 0.0) throw ConfigError("train.max_grad_norm must be positive");
  if (total_steps <= 0) throw ConfigError("train.total_steps must be positive");
  if (eval_interval <= 0 || eval_episodes <= 0) throw ConfigError("train eval settings must be positive");
  if (threads <= 0) throw ConfigError("threads must be positive");
}

NetShape net_shape(const EnvConfig& env) {
  return NetShape{env.obs == ObsMode::kTactile ? env.repr.channels() : 0, vector_dim(env.obs)};
}

uint64_t policy_digest(const EnvConfig& env) {
  const NetShape shape = net_shape(env);
  std::ostringstream s;
  s << "inputs=affine1;obs=" << obs_mode_name(env.obs) << ";channels=" << shape.channels
    << ";vec_dim=" << shape.vec_dim;
  if (env.obs == ObsMode::kTactile) {
    s << ";repr=" << repr_name(env.repr.mode);
    if (env.repr.mode == ReprMode::kBinary) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", env.repr.phi);
      s << ";phi=" << buf;
    }
  }
  return fnv1a64(s.str());
}

double gaussian_log_prob(const float* action, const float* mean,
                         const std::array<float, kActionDim>& log_std) {
  double lp = 0.0;
  for (int j = 0; j < kActionDim; ++j) {
    const double sd = std::exp(static_cast<double>(log_std[j]));
    const double z = (static_cast<double>(action[j]) - mean[j]) / sd;
    lp += -0.5 * z * z - log_std[j] - kHalfLog2Pi;
  }
  return lp;
}

double gaussian_entropy(const std::array<float, kActionDim>& log_std) {
  double h = 0.0;
  for (float l : log_std) h += l + 0.5 + kHalfLog2Pi;
  return h;
}

void RunningStat::update(const std::vector<double>& xs) {
  if (xs.empty()) return;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size());
  const double n = static_cast<double>(xs.size());
  const double delta = m - mean;
  const double total = count + n;
  const double m2 = var * count + v * n + delta * delta * count * n / total;
  mean += delta * n / total;
  var = m2 / total;
  count = total;
}

std::vector<double> RewardNormalizer::normalize(const std::vector<double>& rewards,
                                                const std::vector<bool>& dones) {
  if (returns.size() != rewards.size()) returns.assign(rewards.size(), 0.0);
  for (size_t i = 0; i < rewards.size(); ++i) returns[i] = returns[i] * gamma + rewards[i];
  stat.update(returns);
  std::vector<double> out(rewards.size());
  const double scale = std::sqrt(stat.var + epsilon);
  for (size_t i = 0; i < rewards.size(); ++i) {
    out[i] = std::clamp(rewards[i] / scale, -clip, clip);
    if (dones[i]) returns[i] = 0.0;
  }
  return out;
}

void RolloutBuffer::allocate(int envs, int steps, int image_floats, int vdim) {
  n_envs = envs;
  n_steps = steps;
  image_size = image_floats;
  vec_dim = vdim;
  const size_t n = static_cast<size_t>(envs) * steps;
  images.assign(n * image_floats, 0.0f);
  features.assign(n * vdim, 0.0f);
  actions.assign(n * kActionDim, 0.0f);
  log_probs.assign(n, 0.0f);
  values.assign(n, 0.0f);
  rewards.assign(n, 0.0f);
  dones.assign(n, 0);
  advantages.assign(n, 0.0f);
  returns.assign(n, 0.0f);
  last_values.assign(static_cast<size_t>(envs), 0.0f);
}

VecEnv::VecEnv(const EnvConfig& cfg, int n_envs, uint64_t master_seed, int threads)
    : threads_(threads) {
  for (int i = 0; i < n_envs; ++i) {
    envs_.push_back(std::make_unique<Env>(cfg, env_stream_seed(master_seed, i)));
  }
  obs_.resize(static_cast<size_t>(n_envs));
  running_return_.assign(static_cast<size_t>(n_envs), 0.0);
  parallel_for(n_envs, threads_, [&](int i) { obs_[i] = envs_[i]->reset(); });
}

VecEnv::StepOutput VecEnv::step(const std::vector<Action>& actions) {
  const int n = size();
  StepOutput out;
  out.rewards.assign(n, 0.0);
  out.dones.assign(n, false);
  out.infos.resize(n);
  std::vector<uint8_t> done(n, 0);
  parallel_for(n, threads_, [&](int i) {
    StepResult r = envs_[i]->step(actions[i]);
    out.rewards[i] = r.reward;
    out.infos[i] = r.info;
    done[i] = r.done ? 1 : 0;
    obs_[i] = r.done ? envs_[i]->reset() : std::move(r.obs);
  });
  recent_returns_.clear();
  for (int i = 0; i < n; ++i) {
    out.dones[i] = done[i] != 0;
    running_return_[i] += out.rewards[i];
    if (done[i]) {
      ++episodes_;
      recent_returns_.push_back(running_return_[i]);
      running_return_[i] = 0.0;
    }
  }
  return out;
}

void pack_observation(const Observation& obs, float* images, float* features, int image_size,
                      int vec_dim) {
  if (image_size > 0) {
    const size_t half = static_cast<size_t>(image_size) / 2;
    if (obs.tactile_left.size() != half || obs.tactile_right.size() != half)
      throw UsageError("observation images do not match the policy input");
    std::copy(obs.tactile_left.data.begin(), obs.tactile_left.data.end(), images);
    std::copy(obs.tactile_right.data.begin(), obs.tactile_right.data.end(), images + half);
  }
  const auto f = obs.features();
  if (static_cast<int>(f.size()) != vec_dim || vec_dim > static_cast<int>(kFeatureScale.size()))
    throw UsageError("observation features do not match the policy input");
  for (int i = 0; i < vec_dim; ++i) {
    features[i] = static_cast<float>((f[i] - kFeatureOffset[i]) * kFeatureScale[i]);
  }
}

CollectStats collect_rollouts(VecEnv& envs, PolicyNet<float>& net, const PolicyParams<float>& params,
                              const PpoConfig& cfg, Rng& rng, RolloutBuffer& buffer,
                              RewardNormalizer* normalizer, bool deterministic) {
  const NetShape shape = net.shape();
  const int E = envs.size();
  const int image_size = shape.has_encoder() ? 2 * kImagePixels * shape.channels : 0;
  buffer.allocate(E, cfg.n_steps, image_size, shape.vec_dim);
  CollectStats stats;
  double reward_sum = 0.0;
  std::vector<Action> actions(static_cast<size_t>(E));

  for (int t = 0; t < cfg.n_steps; ++t) {
    const size_t base = static_cast<size_t>(t) * E;
    for (int e = 0; e < E; ++e) {
      pack_observation(envs.observations()[e], buffer.images.data() + (base + e) * image_size,
                       buffer.features.data() + (base + e) * shape.vec_dim, image_size, shape.vec_dim);
    }
    const Batch<float> batch{
        E, std::span<const float>(buffer.images.data() + base * image_size, static_cast<size_t>(E) * image_size),
        std::span<const float>(buffer.features.data() + base * shape.vec_dim,
                               static_cast<size_t>(E) * shape.vec_dim)};
    const NetOutput<float>& out = net.forward(params, batch);
    const auto sd = std_of(out.log_std);
    for (int e = 0; e < E; ++e) {
      float* a = buffer.actions.data() + (base + e) * kActionDim;
      const float* mu = out.mean.data() + static_cast<size_t>(e) * kActionDim;
      for (int j = 0; j < kActionDim; ++j) {
        a[j] = deterministic ? mu[j] : static_cast<float>(mu[j] + sd[j] * rng.normal());
      }
      buffer.log_probs[base + e] = static_cast<float>(gaussian_log_prob(a, mu, out.log_std));
      buffer.values[base + e] = out.value[e];
      actions[e] = Action{a[0], a[1], a[2]};
    }
    const VecEnv::StepOutput step = envs.step(actions);
    const std::vector<double> learn =
        normalizer != nullptr ? normalizer->normalize(step.rewards, step.dones) : step.rewards;
    for (int e = 0; e < E; ++e) {
      buffer.rewards[base + e] = static_cast<float>(learn[e]);
      buffer.dones[base + e] = step.dones[e] ? 1 : 0;
      reward_sum += step.rewards[e];
      stats.episodes += step.dones[e] ? 1 : 0;
    }
  }

  std::vector<float> images(static_cast<size_t>(E) * image_size), features(static_cast<size_t>(E) * shape.vec_dim);
  for (int e = 0; e < E; ++e) {
    pack_observation(envs.observations()[e], images.data() + static_cast<size_t>(e) * image_size,
                     features.data() + static_cast<size_t>(e) * shape.vec_dim, image_size, shape.vec_dim);
  }
  const NetOutput<float>& last = net.forward(params, Batch<float>{E, images, features});
  std::copy(last.value.begin(), last.value.end(), buffer.last_values.begin());
  stats.mean_reward = reward_sum / static_cast<double>(buffer.size());
  return stats;
}

void compute_gae(RolloutBuffer& buffer, double gamma, double lambda) {
  const int E = buffer.n_envs;
  for (int e = 0; e < E; ++e) {
    double next_adv = 0.0;
    double next_value = buffer.last_values[e];
    for (int t = buffer.n_steps - 1; t >= 0; --t) {
      const size_t i = static_cast<size_t>(t) * E + e;
      const double nonterminal = buffer.dones[i] ? 0.0 : 1.0;
      const double delta = buffer.rewards[i] + gamma * nonterminal * next_value - buffer.values[i];
      next_adv = delta + gamma * lambda * nonterminal * next_adv;
      buffer.advantages[i] = static_cast<float>(next_adv);
      buffer.returns[i] = static_cast<float>(next_adv + buffer.values[i]);
      next_value = buffer.values[i];
    }
  }
}

AdamState AdamState::zeros_like(const PolicyParams<float>& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(PolicyParams<float>& params, const PolicyParams<float>& grads, AdamState& state,
               const PpoConfig& cfg) {
  ++state.t;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const double step_size = cfg.lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);
  for (size_t ti = 0; ti < params.tensors.size(); ++ti) {
    auto& p = params.tensors[ti].data;
    const auto& g = grads.tensors[ti].data;
    auto& m = state.m.tensors[ti].data;
    auto& v = state.v.tensors[ti].data;
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double denom = std::sqrt(vi) / sqrt_bc2 + cfg.adam_eps;
      p[i] = static_cast<float>(p[i] - step_size * mi / denom);
    }
  }
}

double clip_grad_norm(PolicyParams<float>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& t : grads.tensors)
    for (float g : t.data) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  const double coef = max_norm / (norm + 1e-6);
  if (coef < 1.0) {
    for (auto& t : grads.tensors)
      for (float& g : t.data) g = static_cast<float>(g * coef);
  }
  return norm;
}

MinibatchLoss ppo_loss(const NetOutput<float>& out, std::span<const float> actions,
                       std::span<const float> old_log_probs, std::span<const double> advantages,
                       std::span<const float> returns, const PpoConfig& cfg, OutputGrads<float>& grads) {
  const int M = out.batch;
  grads.mean.assign(static_cast<size_t>(M) * kActionDim, 0.0f);
  grads.value.assign(static_cast<size_t>(M), 0.0f);
  const auto sd = std_of(out.log_std);
  MinibatchLoss l;
  std::array<double, kActionDim> d_log_std{};
  for (int k = 0; k < M; ++k) {
    const float* a = actions.data() + static_cast<size_t>(k) * kActionDim;
    const float* mu = out.mean.data() + static_cast<size_t>(k) * kActionDim;
    const double log_ratio = gaussian_log_prob(a, mu, out.log_std) - old_log_probs[k];
    const double ratio = std::exp(log_ratio);
    l.max_ratio_err = std::max(l.max_ratio_err, std::abs(ratio - 1.0));
    const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double s1 = ratio * advantages[k];
    const double s2 = clipped_ratio * advantages[k];
    l.policy += -std::min(s1, s2);
    l.clipped += std::abs(ratio - 1.0) > cfg.clip ? 1 : 0;
    l.approx_kl += (ratio - 1.0) - log_ratio;
    // d(loss)/d(log pi); zero where the clipped term is the active minimum.
    const double dlogp = s1 <= s2 ? -s1 / M : 0.0;
    for (int j = 0; j < kActionDim; ++j) {
      const double diff = static_cast<double>(a[j]) - mu[j];
      const double var = static_cast<double>(sd[j]) * sd[j];
      grads.mean[static_cast<size_t>(k) * kActionDim + j] = static_cast<float>(dlogp * diff / var);
      d_log_std[j] += dlogp * (diff * diff / var - 1.0);
    }
    const double verr = static_cast<double>(out.value[k]) - returns[k];
    l.value += verr * verr;
    grads.value[k] = static_cast<float>(cfg.vf_coef * 2.0 * verr / M);
  }
  l.entropy = gaussian_entropy(out.log_std);
  for (int j = 0; j < kActionDim; ++j) grads.log_std[j] = static_cast<float>(d_log_std[j] - cfg.ent_coef);
  l.policy /= M;
  l.value /= M;
  l.approx_kl /= M;
  l.total = l.policy + cfg.vf_coef * l.value - cfg.ent_coef * l.entropy;
  return l;
}

UpdateStats ppo_update(PolicyParams<float>& params, AdamState& adam, const RolloutBuffer& buffer,
                       const PpoConfig& cfg, Rng& rng) {
  const int N = buffer.size();
  const int M = cfg.minibatch;
  if (N % M != 0) throw ConfigError("minibatch must divide the rollout size");
  const PolicyParams<float> params_before = params;
  const AdamState adam_before = adam;

  PolicyNet<float> net(params.shape);
  PolicyParams<float> grads = params.zeros_like();
  std::vector<int> order(static_cast<size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  const int isz = buffer.image_size;
  const int vdim = buffer.vec_dim;
  std::vector<float> images(static_cast<size_t>(M) * isz), features(static_cast<size_t>(M) * vdim);
  std::vector<double> adv(static_cast<size_t>(M));
  std::vector<float> actions(static_cast<size_t>(M) * kActionDim), old_log_probs(static_cast<size_t>(M)),
      returns(static_cast<size_t>(M));
  OutputGrads<float> og;

  UpdateStats stats;
  int minibatches = 0;
  int64_t clipped = 0, counted = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (int start = 0; start < N; start += M) {
      for (int k = 0; k < M; ++k) {
        const size_t i = static_cast<size_t>(order[start + k]);
        std::copy_n(buffer.images.begin() + i * isz, isz, images.begin() + static_cast<size_t>(k) * isz);
        std::copy_n(buffer.features.begin() + i * vdim, vdim, features.begin() + static_cast<size_t>(k) * vdim);
        adv[k] = buffer.advantages[i];
        std::copy_n(buffer.actions.begin() + i * kActionDim, kActionDim,
                    actions.begin() + static_cast<size_t>(k) * kActionDim);
        old_log_probs[k] = buffer.log_probs[i];
        returns[k] = buffer.returns[i];
      }
      if (M > 1) {
        double mean = 0.0;
        for (double a : adv) mean += a;
        mean /= M;
        double var = 0.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / (M - 1));
        for (double& a : adv) a = (a - mean) / (sd + 1e-8);
      }

      const NetOutput<float>& out = net.forward(params, Batch<float>{M, images, features});
      const MinibatchLoss l = ppo_loss(out, actions, old_log_probs, adv, returns, cfg, og);
      if (epoch == 0 && start == 0) stats.first_pass_max_ratio_err = l.max_ratio_err;
      if (!std::isfinite(l.total)) {
        params = params_before;
        adam = adam_before;
        stats.aborted = true;
        stats.diagnostic = "non-finite loss in epoch " + std::to_string(epoch) + " (policy " +
                           std::to_string(l.policy) + ", value " + std::to_string(l.value) + ")";
        return stats;
      }
      net.backward(params, og, grads);
      clip_grad_norm(grads, cfg.max_grad_norm);
      double post = 0.0;
      for (const auto& t : grads.tensors)
        for (float g : t.data) post += static_cast<double>(g) * g;
      stats.max_grad_norm_after_clip = std::max(stats.max_grad_norm_after_clip, std::sqrt(post));
      adam_step(params, grads, adam, cfg);

      stats.policy_loss += l.policy;
      stats.value_loss += l.value;
      stats.entropy += l.entropy;
      stats.approx_kl += l.approx_kl;
      clipped += l.clipped;
      counted += M;
      ++minibatches;
    }
  }
  stats.policy_loss /= minibatches;
  stats.value_loss /= minibatches;
  stats.entropy /= minibatches;
  stats.approx_kl /= minibatches;
  stats.clip_frac = counted > 0 ? static_cast<double>(clipped) / counted : 0.0;
  return stats;
}

PolicyFactory mean_action_policy(std::shared_ptr<const PolicyParams<float>> params) {
  return [params]() -> ActFn {
    auto net = std::make_shared<PolicyNet<float>>(params->shape);
    const NetShape shape = params->shape;
    const int image_size = shape.has_encoder() ? 2 * kImagePixels * shape.channels : 0;
    auto images = std::make_shared<std::vector<float>>(static_cast<size_t>(image_size));
    auto features = std::make_shared<std::vector<float>>(static_cast<size_t>(shape.vec_dim));
    return [=](const Observation& obs, const Env&) {
      pack_observation(obs, images->data(), features->data(), image_size, shape.vec_dim);
      const auto& out = net->forward(*params, Batch<float>{1, *images, *features});
      return Action{out.mean[0], out.mean[1], out.mean[2]};
    };
  };
}

EpisodeResult run_episode(Env& env, const ActFn& act) {
  EpisodeResult result;
  Observation obs = env.reset();
  result.family = env.spec().object.family;
  StepResult r;
  do {
    r = env.step(act(obs, env));
    result.total_reward += r.reward;
    ++result.steps;
    obs = std::move(r.obs);
  } while (!r.done);
  result.deviation = r.info.deviation;
  result.success = r.info.success;
  result.grip_lost = r.info.grip_lost;
  return result;
}

std::vector<EpisodeResult> run_episodes(const EnvConfig& cfg, const PolicyFactory& policy,
                                        int n_episodes, uint64_t seed, int threads) {
  EnvConfig eval_cfg = cfg;
  eval_cfg.training = false;
  std::vector<EpisodeResult> results(static_cast<size_t>(n_episodes));
  parallel_for(n_episodes, threads, [&](int i) {
    Env env(eval_cfg, eval_episode_seed(seed, static_cast<uint64_t>(i)));
    const ActFn act = policy();
    results[i] = run_episode(env, act);
  });
  return results;
}

EvalSummary summarize(const std::vector<EpisodeResult>& results) {
  EvalSummary s;
  s.episodes = static_cast<int>(results.size());
  if (results.empty()) return s;
  for (const auto& r : results) {
    s.mean_reward += r.total_reward;
    s.success_rate += r.success ? 1.0 : 0.0;
    s.mean_deviation += r.deviation;
  }
  s.mean_reward /= s.episodes;
  s.success_rate /= s.episodes;
  s.mean_deviation /= s.episodes;
  return s;
}

Checkpoint to_checkpoint(const TrainState& state, uint64_t digest) {
  Checkpoint ckpt;
  ckpt.digest = digest;
  for (const auto& t : state.params.tensors) ckpt.tensors.push_back(t);
  for (const auto& t : state.adam.m.tensors) {
    Tensor<float> c = t;
    c.name = "adam.m/" + t.name;
    ckpt.tensors.push_back(std::move(c));
  }
  for (const auto& t : state.adam.v.tensors) {
    Tensor<float> c = t;
    c.name = "adam.v/" + t.name;
    ckpt.tensors.push_back(std::move(c));
  }
  auto scalar = [&](const std::string& name, double v) {
    ckpt.tensors.push_back(Tensor<float>{name, {1}, {static_cast<float>(v)}});
  };
  scalar("adam.t", static_cast<double>(state.adam.t));
  scalar("train.step", static_cast<double>(state.step));
  scalar("train.episodes", static_cast<double>(state.episodes));
  scalar("train.best_success", state.best_success);
  scalar("reward_norm.mean", state.reward_stat.mean);
  scalar("reward_norm.var", state.reward_stat.var);
  scalar("reward_norm.count", state.reward_stat.count);
  return ckpt;
}

PolicyParams<float> params_from_checkpoint(const Checkpoint& ckpt, NetShape shape) {
  PolicyParams<float> params = make_params<float>(shape);
  for (auto& t : params.tensors) {
    const Tensor<float>* src = ckpt.find(t.name);
    if (src == nullptr)
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "checkpoint lacks tensor " + t.name);
    if (src->shape != t.shape)
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "tensor " + t.name + " has the wrong shape");
    t.data = src->data;
  }
  return params;
}

TrainState from_checkpoint(const Checkpoint& ckpt, NetShape shape) {
  TrainState st;
  st.params = params_from_checkpoint(ckpt, shape);
  st.adam = AdamState::zeros_like(st.params);
  for (size_t i = 0; i < st.params.tensors.size(); ++i) {
    for (auto [prefix, dst] : {std::pair{"adam.m/", &st.adam.m}, std::pair{"adam.v/", &st.adam.v}}) {
      const std::string name = prefix + st.params.tensors[i].name;
      const Tensor<float>* src = ckpt.find(name);
      if (src == nullptr || src->shape != st.params.tensors[i].shape)
        throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "checkpoint lacks " + name);
      dst->tensors[i].data = src->data;
    }
  }
  auto scalar = [&](const std::string& name) -> double {
    const Tensor<float>* t = ckpt.find(name);
    if (t == nullptr || t->data.size() != 1)
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "checkpoint lacks " + name);
    return t->data[0];
  };
  st.adam.t = static_cast<int64_t>(scalar("adam.t"));
  st.step = static_cast<int64_t>(scalar("train.step"));
  st.episodes = static_cast<int64_t>(scalar("train.episodes"));
  st.best_success = scalar("train.best_success");
  st.reward_stat.mean = scalar("reward_norm.mean");
  st.reward_stat.var = scalar("reward_norm.var");
  st.reward_stat.count = scalar("reward_norm.count");
  return st;
}

TrainOutputs train(const EnvConfig& env_cfg, const PpoConfig& cfg, const std::filesystem::path& out_dir,
                   const std::optional<std::filesystem::path>& resume, const TrainLog& log) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  TrainOutputs outputs;
  outputs.metrics_csv = out_dir / "metrics.csv";
  outputs.final_checkpoint = out_dir / "final.ckpt";
  outputs.best_checkpoint = out_dir / "best.ckpt";

  const NetShape shape = net_shape(env_cfg);
  const uint64_t digest = policy_digest(env_cfg);
  TrainState st;
  if (resume) {
    st = from_checkpoint(load_checkpoint(*resume, digest), shape);
  } else {
    Rng init_rng(cfg.seed);
    st.params = init_params<float>(init_rng, shape);
    st.adam = AdamState::zeros_like(st.params);
  }

  EnvConfig train_cfg = env_cfg;
  train_cfg.training = true;
  // A resumed run starts fresh episodes and streams from the resumed step.
  const uint64_t stream = cfg.seed + static_cast<uint64_t>(st.step) * 7919ULL;
  VecEnv envs(train_cfg, cfg.n_envs, stream, cfg.threads);
  Rng rng(stream ^ 0x5eedULL);
  RewardNormalizer normalizer;
  normalizer.gamma = cfg.gamma;
  normalizer.stat = st.reward_stat;
  PolicyNet<float> net(shape);
  RolloutBuffer buffer;

  const bool append = resume && std::filesystem::exists(outputs.metrics_csv);
  std::ofstream csv(outputs.metrics_csv, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + outputs.metrics_csv.string());
  if (!append) csv << "step,episodes,mean_reward,success_rate,mean_deviation,wall_seconds\n";

  const auto t0 = std::chrono::steady_clock::now();
  int64_t next_eval = (st.step / cfg.eval_interval + 1) * cfg.eval_interval;
  auto params_ptr = std::make_shared<PolicyParams<float>>();
  while (st.step < cfg.total_steps) {
    const CollectStats cs = collect_rollouts(envs, net, st.params, cfg, rng, buffer,
                                             cfg.normalize_reward ? &normalizer : nullptr);
    st.step += cfg.batch_size();
    st.episodes += cs.episodes;
    compute_gae(buffer, cfg.gamma, cfg.gae_lambda);
    const UpdateStats us = ppo_update(st.params, st.adam, buffer, cfg, rng);
    if (us.aborted && log) log("update aborted: " + us.diagnostic);
    st.reward_stat = normalizer.stat;

    if (st.step >= next_eval || st.step >= cfg.total_steps) {
      while (next_eval <= st.step) next_eval += cfg.eval_interval;
      *params_ptr = st.params;
      const EvalSummary ev = summarize(run_episodes(env_cfg, mean_action_policy(params_ptr),
                                                    cfg.eval_episodes, kTrainEvalSeed, cfg.threads));
      const double wall =
          cfg.record_wall_time
              ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
              : 0.0;
      csv << format_row(st.step, st.episodes, ev, wall);
      csv.flush();
      if (ev.success_rate > st.best_success) {
        st.best_success = ev.success_rate;
        save_checkpoint(outputs.best_checkpoint, to_checkpoint(st, digest));
      }
      save_checkpoint(outputs.final_checkpoint, to_checkpoint(st, digest));
      outputs.final_eval = ev;
      if (log) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "step %lld  reward/step %.3f  eval success %.3f  deviation %.3f  "
                      "vloss %.4f  kl %.4f  clip %.3f  entropy %.3f",
                      static_cast<long long>(st.step), cs.mean_reward, ev.success_rate,
                      ev.mean_deviation, us.value_loss, us.approx_kl, us.clip_frac, us.entropy);
        log(buf);
      }
    }
  }
  if (!std::filesystem::exists(outputs.final_checkpoint))
    save_checkpoint(outputs.final_checkpoint, to_checkpoint(st, digest));
  return outputs;
}

}  // namespace pivot
