#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pivot/checkpoint.h"
#include "pivot/env.h"
#include "pivot/nnet.h"

namespace pivot {

struct PpoConfig {
  double lr = 3e-4;
  int n_envs = 8;
  int n_steps = 256;
  int minibatch = 64;
  int epochs = 10;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int64_t total_steps = 2000000;
  uint64_t seed = 0;
  // Scale rewards by a running estimate of the discounted-return std.
  bool normalize_reward = true;
  int64_t eval_interval = 20480;
  int eval_episodes = 50;
  int threads = 1;
  // Fill the wall_seconds metrics column; off keeps metrics byte-stable.
  bool record_wall_time = false;

  int batch_size() const { return n_envs * n_steps; }
  // Throws ConfigError on violated invariants.
  void validate() const;
};

NetShape net_shape(const EnvConfig& env);

// Digest of everything that fixes the meaning of a policy's parameters:
// observation mode, representation, threshold and network shape.
uint64_t policy_digest(const EnvConfig& env);

// Diagonal Gaussian helpers, summed over action dimensions.
double gaussian_log_prob(const float* action, const float* mean, const std::array<float, kActionDim>& log_std);
double gaussian_entropy(const std::array<float, kActionDim>& log_std);

// Running mean / variance (parallel-merge form).
struct RunningStat {
  double mean = 0.0;
  double var = 1.0;
  double count = 1e-4;
  void update(const std::vector<double>& xs);
};

// Scales rewards by the std of per-environment discounted returns.
struct RewardNormalizer {
  RunningStat stat;
  std::vector<double> returns;
  double gamma = 0.99;
  double clip = 10.0;
  double epsilon = 1e-8;

  // rewards and dones hold one entry per environment.
  std::vector<double> normalize(const std::vector<double>& rewards, const std::vector<bool>& dones);
};

// Transitions in step-major order: index = t * n_envs + e.
struct RolloutBuffer {
  int n_envs = 0;
  int n_steps = 0;
  int image_size = 0;  // floats per sample (both sensors), 0 without images
  int vec_dim = 0;
  std::vector<float> images;
  std::vector<float> features;
  std::vector<float> actions;
  std::vector<float> log_probs;
  std::vector<float> values;
  std::vector<float> rewards;  // as used for learning (normalized when enabled)
  std::vector<uint8_t> dones;  // episode ended at this step
  std::vector<float> advantages;
  std::vector<float> returns;
  std::vector<float> last_values;  // V(s_T) per env for bootstrapping

  void allocate(int n_envs, int n_steps, int image_size, int vec_dim);
  int size() const { return n_envs * n_steps; }
};

// Environments with persistent episodes that reset themselves when done.
class VecEnv {
 public:
  VecEnv(const EnvConfig& cfg, int n_envs, uint64_t master_seed, int threads = 1);

  int size() const { return static_cast<int>(envs_.size()); }
  const std::vector<Observation>& observations() const { return obs_; }

  struct StepOutput {
    std::vector<double> rewards;
    std::vector<bool> dones;
    std::vector<EnvInfo> infos;
  };
  StepOutput step(const std::vector<Action>& actions);

  int64_t episodes_finished() const { return episodes_; }
  const std::vector<double>& recent_returns() const { return recent_returns_; }

 private:
  std::vector<std::unique_ptr<Env>> envs_;
  std::vector<Observation> obs_;
  std::vector<double> running_return_;
  std::vector<double> recent_returns_;
  int threads_;
  int64_t episodes_ = 0;
};

// Copies the policy inputs of `obs` into a batch slot.
void pack_observation(const Observation& obs, float* images, float* features, int image_size,
                      int vec_dim);

struct CollectStats {
  int64_t episodes = 0;
  double mean_reward = 0.0;  // raw per-step reward
};

// Steps every environment n_steps times with actions sampled from the
// policy (or its mean when `deterministic`).
CollectStats collect_rollouts(VecEnv& envs, PolicyNet<float>& net, const PolicyParams<float>& params,
                              const PpoConfig& cfg, Rng& rng, RolloutBuffer& buffer,
                              RewardNormalizer* normalizer = nullptr, bool deterministic = false);

// Fills advantages and returns from rewards, values, dones and last_values.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

struct AdamState {
  PolicyParams<float> m;
  PolicyParams<float> v;
  int64_t t = 0;
  static AdamState zeros_like(const PolicyParams<float>& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

void adam_step(PolicyParams<float>& params, const PolicyParams<float>& grads, AdamState& state,
               const PpoConfig& cfg);

// Scales grads in place so the global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(PolicyParams<float>& grads, double max_norm);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
  double first_pass_max_ratio_err = 0.0;  // |rho - 1| on the first minibatches
  double max_grad_norm_after_clip = 0.0;
  bool aborted = false;
  std::string diagnostic;
};

struct MinibatchLoss {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double approx_kl = 0.0;
  double max_ratio_err = 0.0;
  int64_t clipped = 0;
};

// Clipped-surrogate loss of one minibatch and its gradient with respect to
// the network outputs. `advantages` are already normalized.
MinibatchLoss ppo_loss(const NetOutput<float>& out, std::span<const float> actions,
                       std::span<const float> old_log_probs, std::span<const double> advantages,
                       std::span<const float> returns, const PpoConfig& cfg, OutputGrads<float>& grads);

UpdateStats ppo_update(PolicyParams<float>& params, AdamState& adam, const RolloutBuffer& buffer,
                       const PpoConfig& cfg, Rng& rng);

// Episode-level evaluation shared by training and the eval suite.
struct EpisodeResult {
  double total_reward = 0.0;
  double deviation = 0.0;
  bool success = false;
  bool grip_lost = false;
  Family family = Family::kRod;
  int steps = 0;
};

using ActFn = std::function<Action(const Observation&, const Env&)>;
// Makes a fresh, independently stateful actor for one episode.
using PolicyFactory = std::function<ActFn()>;

PolicyFactory mean_action_policy(std::shared_ptr<const PolicyParams<float>> params);

// Seed of evaluation episode `index` under evaluation seed `seed`.
constexpr uint64_t eval_episode_seed(uint64_t seed, uint64_t index) {
  return (seed + 1) * 1000003ULL + index;
}

EpisodeResult run_episode(Env& env, const ActFn& act);
std::vector<EpisodeResult> run_episodes(const EnvConfig& cfg, const PolicyFactory& policy,
                                        int n_episodes, uint64_t seed, int threads = 1);

struct EvalSummary {
  int episodes = 0;
  double mean_reward = 0.0;
  double success_rate = 0.0;
  double mean_deviation = 0.0;
};
EvalSummary summarize(const std::vector<EpisodeResult>& results);

struct TrainState {
  PolicyParams<float> params;
  AdamState adam;
  int64_t step = 0;
  int64_t episodes = 0;
  double best_success = -1.0;
  RunningStat reward_stat;
};

Checkpoint to_checkpoint(const TrainState& state, uint64_t digest);
// Throws CheckpointError (kShapeMismatch) when tensors do not fit `shape`.
TrainState from_checkpoint(const Checkpoint& ckpt, NetShape shape);
// Policy parameters only; optimizer tensors may be absent.
PolicyParams<float> params_from_checkpoint(const Checkpoint& ckpt, NetShape shape);

struct TrainOutputs {
  std::filesystem::path metrics_csv;
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  EvalSummary final_eval;
};

using TrainLog = std::function<void(const std::string&)>;

// Runs PPO until cfg.total_steps, writing metrics.csv, final.ckpt and
// best.ckpt into `out_dir`. Resumes from `resume` when given.
TrainOutputs train(const EnvConfig& env_cfg, const PpoConfig& cfg, const std::filesystem::path& out_dir,
                   const std::optional<std::filesystem::path>& resume = std::nullopt,
                   const TrainLog& log = nullptr);

}  // namespace pivot
