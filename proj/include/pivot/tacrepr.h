#pragma once

#include <optional>
#include <string_view>

#include "pivot/dynamics.h"
#include "pivot/image.h"
#include "pivot/rng.h"
#include "pivot/tacrender.h"
#include "pivot/units.h"

namespace pivot {

enum class ReprMode { kRgb, kDiff, kBinary };

std::string_view repr_name(ReprMode m);
std::optional<ReprMode> parse_repr(std::string_view name);

struct ReprConfig {
  ReprMode mode = ReprMode::kBinary;
  double phi = 0.05;
  bool augment = false;
  double scale_lo = 0.2;
  double scale_hi = 1.0;
  double erase_prob = 0.5;
  double erase_max_frac = 0.2;
  // RGB jitter: brightness offset in [-b, b], contrast factor in
  // [contrast_lo, contrast_hi], hue rotation in [-hue, hue].
  double brightness = 0.2;
  double contrast_lo = 0.8;
  double contrast_hi = 1.2;
  double hue = deg_to_rad(15.0);

  int channels() const { return mode == ReprMode::kRgb ? 3 : 1; }
  // Throws ConfigError on violated invariants.
  void validate() const;
};

using ProcessedImage = Image;

// Channel-mean absolute difference to the canonical frame. Throws UsageError
// on shape mismatch.
ProcessedImage diff_image(const Image& frame, const Image& canonical);

// 1 where diff > phi, else 0. Throws ConfigError unless 0 < phi < 1.
ProcessedImage binarize(const ProcessedImage& diff, double phi);

// Mirrors right-sensor images about the vertical axis.
ProcessedImage flip_right(ProcessedImage image, Sensor sensor);
ProcessedImage flip_horizontal(ProcessedImage image);

// Random scale and erase (all modes) plus brightness/contrast/hue jitter for
// three-channel images. Output clamped to [0, 1].
ProcessedImage augment(ProcessedImage image, const ReprConfig& cfg, Rng& rng);

// Full pipeline for one sensor: representation, right-sensor flip, and
// augmentation when `aug_rng` is provided and cfg.augment is set. `phi_offset`
// shifts the threshold at deployment without touching cfg.
ProcessedImage process_frame(const TactileFrame& frame, const TactileFrame& canonical,
                             const ReprConfig& cfg, Rng* aug_rng = nullptr,
                             double phi_offset = 0.0);

}  // namespace pivot
