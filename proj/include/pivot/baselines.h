#pragma once

#include <memory>
#include <optional>

#include "pivot/env.h"
#include "pivot/ppo.h"

namespace pivot {

inline constexpr int kPcaMinPixels = 20;

// Principal-axis angle of the on-pixels (value > 0) of a single-channel
// image, folded to [0, pi). x runs along columns and y up the image, scaled
// by the pixel pitches. Returns nullopt below `min_pixels` on-pixels.
std::optional<double> estimate_angle_pca(const ProcessedImage& binary, double pitch_u = 1.0,
                                         double pitch_v = 1.0, int min_pixels = kPcaMinPixels);

// Relative angle modulo pi implied by a patch axis angle in sensor
// coordinates, folded to [0, pi).
double patch_angle_to_rel(double patch_angle);

// Relative angle (mod pi) from both processed sensor images, or nullopt when
// neither sensor shows a usable imprint.
std::optional<double> estimate_rel_angle(const Observation& obs, const RenderConfig& render);

// Resolves the mod-pi ambiguity by continuity with the previous estimate.
class AngleUnwrapper {
 public:
  explicit AngleUnwrapper(double prior = kPi) : value_(prior) {}
  // Missing estimates hold the previous value.
  double update(std::optional<double> rel_mod_pi);
  double value() const { return value_; }

 private:
  double value_;
};

// Environment settings for running an oracle policy on PCA estimates.
EnvConfig pca_env_config(EnvConfig base);

// Oracle-angle policy whose angle input is replaced by the unwrapped PCA
// estimate. Each actor carries its own unwrapper.
PolicyFactory pca_policy(std::shared_ptr<const PolicyParams<float>> oracle_params);

// Oracle-angle policy fed the true angle from the environment state.
PolicyFactory true_angle_policy(std::shared_ptr<const PolicyParams<float>> oracle_params);

}  // namespace pivot
