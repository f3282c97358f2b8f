#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "pivot/dynamics.h"
#include "pivot/rng.h"
#include "pivot/scene.h"
#include "pivot/tacrender.h"
#include "pivot/tacrepr.h"

namespace pivot {

enum class ObsMode { kTactile, kOracleAngle, kProprioOnly };

std::string_view obs_mode_name(ObsMode m);
std::optional<ObsMode> parse_obs_mode(std::string_view name);

inline constexpr int kProprioDim = 7;

// Length of the non-image feature vector fed to the policy.
inline int vector_dim(ObsMode m) { return m == ObsMode::kOracleAngle ? 9 : 8; }

struct Observation {
  // Processed tactile images; empty when the mode carries no images.
  ProcessedImage tactile_left;
  ProcessedImage tactile_right;
  // gripper x, z, pitch; their change since episode start; step / horizon.
  std::array<float, kProprioDim> proprio{};
  float target = 0.0f;
  // Ground-truth relative angle, present in OracleAngle mode only.
  std::optional<float> angle;

  bool has_images() const { return !tactile_left.empty(); }
  // proprio, target, then angle when present.
  std::vector<float> features() const;
};

// Where the target tip is measured. kGripper places it at the current
// gripper pose with the object at the target angle, so only rotating the
// object closes the distance. kFixed freezes it at the initial gripper pose,
// which pitching the gripper alone can reach.
enum class TipTarget { kGripper, kFixed };

struct RewardConfig {
  TipTarget tip_target = TipTarget::kGripper;
  double r_contact = 0.5;
  double w_position = 10.0;
  double w_angle = 10.0;
  double w_penalty = 0.01;
};

struct EpisodeContext {
  double init_rel_angle = kPi;
  double target_rel_angle = kPi;
  double init_dist = 0.0;
  double init_angle_err = 0.0;
  int step_count = 0;
  int horizon = 100;
  // Target tip location, frozen at the initial gripper pose.
  Vec2 target_tip;
  double start_x = 0.0;
  double start_z = 0.0;
  double start_pitch = 0.0;
  int zero_contact_streak = 0;
  bool done = false;
};

struct EnvConfig {
  TaskRanges ranges;
  std::vector<Family> families{kAllFamilies.begin(), kAllFamilies.end()};
  DynamicsConfig dynamics;
  RenderConfig render;
  ReprConfig repr;
  RewardConfig reward;
  ObsMode obs = ObsMode::kTactile;
  int horizon = 100;
  int min_contact_pixels = 20;
  int grip_loss_steps = 3;
  double success_threshold = 0.15;
  // Training-time augmentation of tactile images.
  bool training = false;
  // Produce processed images even when the policy does not observe them
  // (used by the PCA estimator baseline).
  bool estimator_images = false;
  // Deployment-side sensor perturbations.
  double noise_sigma = 0.0;
  double phi_offset = 0.0;

  bool produces_images() const { return obs == ObsMode::kTactile || estimator_images; }
};

struct EnvInfo {
  double deviation = 0.0;
  int contact_count = 0;
  bool left_contact = false;
  bool right_contact = false;
  bool blocked = false;
  bool grip_lost = false;
  bool success = false;  // meaningful once done
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  EnvInfo info;
};

// Sensors whose binary imprint has at least `min_pixels` on-pixels.
int contact_count(const Image& left, const Image& right, int min_pixels = 20);

double compute_reward(const SceneState& state, const EpisodeContext& ctx, const Action& action,
                      int contact_count, const RewardConfig& cfg, const DynamicsConfig& dyn);

// |achieved rotation - target rotation| / target rotation.
double deviation_ratio(const SceneState& state, const EpisodeContext& ctx);
bool success(const SceneState& state, const EpisodeContext& ctx, double threshold = 0.15);

EpisodeContext make_context(const SceneState& initial, const SceneSpec& spec, int horizon,
                            const DynamicsConfig& dyn);

class Env {
 public:
  Env(EnvConfig cfg, uint64_t seed);

  // Samples a fresh scene from the configured ranges and families.
  Observation reset();
  Observation reset(const SceneSpec& spec);
  Observation reset(const SceneSpec& spec, double tip_clearance);

  // Throws UsageError once the episode is done.
  StepResult step(const Action& action);

  const SceneState& state() const { return state_; }
  const EpisodeContext& context() const { return ctx_; }
  const SceneSpec& spec() const { return spec_; }
  const EnvConfig& config() const { return cfg_; }

  // Forces empty contact patches from the next step on.
  void inject_grip_loss(bool on) { grip_loss_ = on; }

 private:
  Observation observe(EnvInfo* info);

  EnvConfig cfg_;
  Rng rng_;
  TactileFrame canonical_;
  SceneSpec spec_;
  SceneState state_;
  EpisodeContext ctx_;
  bool grip_loss_ = false;
};

}  // namespace pivot
