#include "pivot/env.h"

#include <cmath>

#include "pivot/errors.h"

namespace pivot {
namespace {

constexpr double kDegenerate = 1e-9;
constexpr int kMaxResetAttempts = 100;

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.z - b.z); }

}  // namespace

std::string_view obs_mode_name(ObsMode m) {
  switch (m) {
    case ObsMode::kTactile: return "tactile";
    case ObsMode::kOracleAngle: return "oracle";
    case ObsMode::kProprioOnly: return "proprio";
  }
  return "unknown";
}

std::optional<ObsMode> parse_obs_mode(std::string_view name) {
  for (ObsMode m : {ObsMode::kTactile, ObsMode::kOracleAngle, ObsMode::kProprioOnly}) {
    if (obs_mode_name(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<float> Observation::features() const {
  std::vector<float> f(proprio.begin(), proprio.end());
  f.push_back(target);
  if (angle) f.push_back(*angle);
  return f;
}

int contact_count(const Image& left, const Image& right, int min_pixels) {
  return (count_on(left) >= min_pixels ? 1 : 0) + (count_on(right) >= min_pixels ? 1 : 0);
}

double compute_reward(const SceneState& state, const EpisodeContext& ctx, const Action& action,
                      int cc, const RewardConfig& cfg, const DynamicsConfig& dyn) {
  double reward = cc * cfg.r_contact;
  if (cc >= 1) {
    if (ctx.init_dist > kDegenerate) {
      Vec2 target = ctx.target_tip;
      if (cfg.tip_target == TipTarget::kGripper) {
        SceneState at_target = state;
        at_target.rel_angle = ctx.target_rel_angle;
        target = tip_position(at_target, dyn);
      }
      const double cur = distance(tip_position(state, dyn), target);
      reward += cfg.w_position * (1.0 - cur / ctx.init_dist);
    }
    if (ctx.init_angle_err > kDegenerate) {
      const double cur = std::abs(state.rel_angle - ctx.target_rel_angle);
      reward += cfg.w_angle * (1.0 - cur / ctx.init_angle_err);
    }
  }
  reward -= cfg.w_penalty * action.clamped().squared_norm();
  return reward;
}

double deviation_ratio(const SceneState& state, const EpisodeContext& ctx) {
  const double target_rotated = std::abs(ctx.target_rel_angle - ctx.init_rel_angle);
  if (target_rotated <= kDegenerate) return 0.0;
  const double rotated = std::abs(state.rel_angle - ctx.init_rel_angle);
  return std::abs(rotated - target_rotated) / target_rotated;
}

bool success(const SceneState& state, const EpisodeContext& ctx, double threshold) {
  return deviation_ratio(state, ctx) < threshold;
}

EpisodeContext make_context(const SceneState& initial, const SceneSpec& spec, int horizon,
                            const DynamicsConfig& dyn) {
  EpisodeContext ctx;
  ctx.init_rel_angle = initial.rel_angle;
  ctx.target_rel_angle = spec.target_rel_angle;
  ctx.horizon = horizon;
  ctx.start_x = initial.gripper_x;
  ctx.start_z = initial.gripper_z;
  ctx.start_pitch = initial.gripper_pitch;
  SceneState at_target = initial;
  at_target.rel_angle = spec.target_rel_angle;
  ctx.target_tip = tip_position(at_target, dyn);
  ctx.init_dist = distance(tip_position(initial, dyn), ctx.target_tip);
  ctx.init_angle_err = std::abs(initial.rel_angle - spec.target_rel_angle);
  return ctx;
}

Env::Env(EnvConfig cfg, uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
  cfg_.repr.validate();
  if (cfg_.families.empty()) throw ConfigError("env: family set is empty");
  canonical_ = canonical_image(cfg_.render);
}

Observation Env::reset() { return reset(sample_scene(rng_, cfg_.families, cfg_.ranges)); }

Observation Env::reset(const SceneSpec& spec) {
  for (int attempt = 0; attempt < kMaxResetAttempts; ++attempt) {
    const double clearance = cfg_.ranges.tip_clearance.sample(rng_);
    SceneState s = initial_state(spec, clearance, cfg_.dynamics);
    SceneState at_target = s;
    at_target.rel_angle = spec.target_rel_angle;
    if (tip_position(at_target, cfg_.dynamics).z >= spec.table_height) {
      return reset(spec, clearance);
    }
  }
  throw ConfigError("env reset: target tip lies below the table for every sampled height");
}

Observation Env::reset(const SceneSpec& spec, double tip_clearance) {
  spec_ = spec;
  state_ = initial_state(spec, tip_clearance, cfg_.dynamics);
  ctx_ = make_context(state_, spec, cfg_.horizon, cfg_.dynamics);
  grip_loss_ = false;
  return observe(nullptr);
}

Observation Env::observe(EnvInfo* info) {
  Observation obs;
  SceneState view = state_;
  if (grip_loss_) view.grasped = false;
  const PatchGeometry left = contact_patch(view, Sensor::kLeft, cfg_.dynamics);
  const PatchGeometry right = contact_patch(view, Sensor::kRight, cfg_.dynamics);
  if (info != nullptr) {
    const Image lm = rasterize_patch(left, cfg_.render);
    const Image rm = rasterize_patch(right, cfg_.render);
    info->left_contact = count_on(lm) >= cfg_.min_contact_pixels;
    info->right_contact = count_on(rm) >= cfg_.min_contact_pixels;
    info->contact_count = contact_count(lm, rm, cfg_.min_contact_pixels);
  }
  if (cfg_.produces_images()) {
    Rng* aug = cfg_.training ? &rng_ : nullptr;
    for (Sensor sensor : {Sensor::kLeft, Sensor::kRight}) {
      const PatchGeometry& patch = sensor == Sensor::kLeft ? left : right;
      TactileFrame frame = render_phong(heightmap_from_patch(patch, cfg_.render), cfg_.render, sensor);
      add_pixel_noise(frame.rgb, cfg_.noise_sigma, rng_);
      ProcessedImage img = process_frame(frame, canonical_, cfg_.repr, aug, cfg_.phi_offset);
      (sensor == Sensor::kLeft ? obs.tactile_left : obs.tactile_right) = std::move(img);
    }
  }
  obs.proprio = {static_cast<float>(state_.gripper_x),
                 static_cast<float>(state_.gripper_z),
                 static_cast<float>(state_.gripper_pitch),
                 static_cast<float>(state_.gripper_x - ctx_.start_x),
                 static_cast<float>(state_.gripper_z - ctx_.start_z),
                 static_cast<float>(state_.gripper_pitch - ctx_.start_pitch),
                 static_cast<float>(ctx_.step_count) / static_cast<float>(ctx_.horizon)};
  obs.target = static_cast<float>(ctx_.target_rel_angle);
  if (cfg_.obs == ObsMode::kOracleAngle) obs.angle = static_cast<float>(state_.rel_angle);
  return obs;
}

StepResult Env::step(const Action& action) {
  if (ctx_.done) throw UsageError("env step: episode is finished, call reset()");
  StepResult out;
  StepInfo dyn_info;
  state_ = step_dynamics(state_, action, cfg_.dynamics, &dyn_info);
  ++ctx_.step_count;
  out.obs = observe(&out.info);
  out.info.blocked = dyn_info.blocked;
  const int cc = out.info.contact_count;
  out.reward = compute_reward(state_, ctx_, action, cc, cfg_.reward, cfg_.dynamics);
  ctx_.zero_contact_streak = cc == 0 ? ctx_.zero_contact_streak + 1 : 0;
  out.info.grip_lost = ctx_.zero_contact_streak >= cfg_.grip_loss_steps;
  out.done = ctx_.step_count >= ctx_.horizon || out.info.grip_lost;
  ctx_.done = out.done;
  out.info.deviation = deviation_ratio(state_, ctx_);
  out.info.success = !out.info.grip_lost && out.info.deviation < cfg_.success_threshold;
  return out;
}

}  // namespace pivot
