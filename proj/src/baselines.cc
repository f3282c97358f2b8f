#include "pivot/baselines.h"

#include <cmath>

namespace pivot {
namespace {

double fold_pi(double a) {
  a = std::fmod(a, kPi);
  if (a < 0.0) a += kPi;
  return a >= kPi ? 0.0 : a;
}

ActFn oracle_actor(std::shared_ptr<const PolicyParams<float>> params, bool use_pca) {
  auto net = std::make_shared<PolicyNet<float>>(params->shape);
  auto unwrapper = std::make_shared<AngleUnwrapper>();
  auto features = std::make_shared<std::vector<float>>(static_cast<size_t>(params->shape.vec_dim));
  return [=](const Observation& obs, const Env& env) {
    Observation view;
    view.proprio = obs.proprio;
    view.target = obs.target;
    const double angle = use_pca ? unwrapper->update(estimate_rel_angle(obs, env.config().render))
                                 : env.state().rel_angle;
    view.angle = static_cast<float>(angle);
    pack_observation(view, nullptr, features->data(), 0, params->shape.vec_dim);
    const auto& out = net->forward(*params, Batch<float>{1, {}, *features});
    return Action{out.mean[0], out.mean[1], out.mean[2]};
  };
}

}  // namespace

std::optional<double> estimate_angle_pca(const ProcessedImage& binary, double pitch_u, double pitch_v,
                                         int min_pixels) {
  int n = 0;
  double sx = 0.0, sy = 0.0;
  for (int r = 0; r < binary.rows; ++r) {
    for (int c = 0; c < binary.cols; ++c) {
      if (binary.at(r, c) > 0.0f) {
        ++n;
        sx += c * pitch_u;
        sy += -r * pitch_v;
      }
    }
  }
  if (n < min_pixels || n == 0) return std::nullopt;
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int r = 0; r < binary.rows; ++r) {
    for (int c = 0; c < binary.cols; ++c) {
      if (binary.at(r, c) > 0.0f) {
        const double x = c * pitch_u - mx;
        const double y = -r * pitch_v - my;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
      }
    }
  }
  return fold_pi(0.5 * std::atan2(2.0 * sxy, sxx - syy));
}

double patch_angle_to_rel(double patch_angle) { return fold_pi(kPi / 2.0 - patch_angle); }

std::optional<double> estimate_rel_angle(const Observation& obs, const RenderConfig& render) {
  double cx = 0.0, cy = 0.0;
  int used = 0;
  for (const ProcessedImage* img : {&obs.tactile_left, &obs.tactile_right}) {
    if (img->empty()) continue;
    const auto theta = estimate_angle_pca(*img, render.pixel_pitch_u(), render.pixel_pitch_v());
    if (!theta) continue;
    cx += std::cos(2.0 * *theta);
    cy += std::sin(2.0 * *theta);
    ++used;
  }
  if (used == 0) return std::nullopt;
  return patch_angle_to_rel(fold_pi(0.5 * std::atan2(cy, cx)));
}

double AngleUnwrapper::update(std::optional<double> rel_mod_pi) {
  if (!rel_mod_pi) return value_;
  const double k = std::round((value_ - *rel_mod_pi) / kPi);
  value_ = *rel_mod_pi + k * kPi;
  return value_;
}

EnvConfig pca_env_config(EnvConfig base) {
  base.obs = ObsMode::kOracleAngle;
  base.estimator_images = true;
  base.repr.mode = ReprMode::kBinary;
  base.repr.augment = false;
  return base;
}

PolicyFactory pca_policy(std::shared_ptr<const PolicyParams<float>> oracle_params) {
  return [oracle_params]() { return oracle_actor(oracle_params, true); };
}

PolicyFactory true_angle_policy(std::shared_ptr<const PolicyParams<float>> oracle_params) {
  return [oracle_params]() { return oracle_actor(oracle_params, false); };
}

}  // namespace pivot
