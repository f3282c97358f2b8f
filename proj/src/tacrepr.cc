#include "pivot/tacrepr.h"

#include <algorithm>
#include <cmath>

#include "pivot/errors.h"

namespace pivot {

std::string_view repr_name(ReprMode m) {
  switch (m) {
    case ReprMode::kRgb: return "rgb";
    case ReprMode::kDiff: return "diff";
    case ReprMode::kBinary: return "binary";
  }
  return "unknown";
}

std::optional<ReprMode> parse_repr(std::string_view name) {
  for (ReprMode m : {ReprMode::kRgb, ReprMode::kDiff, ReprMode::kBinary}) {
    if (repr_name(m) == name) return m;
  }
  return std::nullopt;
}

void ReprConfig::validate() const {
  if (!(phi > 0.0 && phi < 1.0)) throw ConfigError("repr.phi must lie in (0, 1)");
  if (!(scale_lo >= 0.0 && scale_hi <= 1.0 && scale_lo <= scale_hi))
    throw ConfigError("repr.scale_range must satisfy 0 <= low <= high <= 1");
  if (!(erase_prob >= 0.0 && erase_prob <= 1.0)) throw ConfigError("repr.erase_prob must lie in [0, 1]");
  if (!(erase_max_frac >= 0.0 && erase_max_frac <= 0.25))
    throw ConfigError("repr.erase_max_frac must lie in [0, 0.25]");
  if (!(contrast_lo > 0.0 && contrast_lo <= contrast_hi))
    throw ConfigError("repr.contrast range is invalid");
  if (brightness < 0.0 || hue < 0.0) throw ConfigError("repr jitter ranges must be non-negative");
}

ProcessedImage diff_image(const Image& frame, const Image& canonical) {
  if (!frame.same_shape(canonical)) throw UsageError("diff_image: frame shapes differ");
  ProcessedImage out(1);
  const int ch = frame.channels;
  for (int i = 0; i < kImagePixels; ++i) {
    float acc = 0.0f;
    for (int c = 0; c < ch; ++c) {
      acc += std::abs(frame.data[i * ch + c] - canonical.data[i * ch + c]);
    }
    out.data[i] = std::clamp(acc / static_cast<float>(ch), 0.0f, 1.0f);
  }
  return out;
}

ProcessedImage binarize(const ProcessedImage& diff, double phi) {
  if (!(phi > 0.0 && phi < 1.0)) throw ConfigError("binarize: phi must lie in (0, 1)");
  if (diff.channels != 1) throw UsageError("binarize: expects a single-channel image");
  ProcessedImage out(1);
  const float threshold = static_cast<float>(phi);
  for (size_t i = 0; i < diff.data.size(); ++i) out.data[i] = diff.data[i] > threshold ? 1.0f : 0.0f;
  return out;
}

ProcessedImage flip_horizontal(ProcessedImage image) {
  const int ch = image.channels;
  for (int r = 0; r < image.rows; ++r) {
    for (int c = 0; c < image.cols / 2; ++c) {
      const int m = image.cols - 1 - c;
      for (int k = 0; k < ch; ++k) std::swap(image.at(r, c, k), image.at(r, m, k));
    }
  }
  return image;
}

ProcessedImage flip_right(ProcessedImage image, Sensor sensor) {
  if (sensor == Sensor::kLeft) return image;
  return flip_horizontal(std::move(image));
}

ProcessedImage augment(ProcessedImage image, const ReprConfig& cfg, Rng& rng) {
  const int ch = image.channels;
  const float scale = static_cast<float>(rng.uniform(cfg.scale_lo, cfg.scale_hi));
  for (float& v : image.data) v *= scale;

  if (ch == 3) {
    const double brightness = rng.uniform(-cfg.brightness, cfg.brightness);
    const double contrast = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
    const double hue = rng.uniform(-cfg.hue, cfg.hue);
    double mean = 0.0;
    for (float v : image.data) mean += v;
    mean /= static_cast<double>(image.data.size());
    const double c = std::cos(hue);
    const double s = std::sin(hue);
    const double k = (1.0 - c) / 3.0;
    const double r3 = s / std::sqrt(3.0);
    const double a = c + k, b = k - r3, d = k + r3;
    for (int i = 0; i < kImagePixels; ++i) {
      float* px = &image.data[static_cast<size_t>(i) * 3];
      const double r0 = px[0], g0 = px[1], b0 = px[2];
      const double rot[3] = {a * r0 + b * g0 + d * b0, d * r0 + a * g0 + b * b0,
                             b * r0 + d * g0 + a * b0};
      for (int k2 = 0; k2 < 3; ++k2) {
        px[k2] = static_cast<float>(rot[k2] * contrast + mean * (1.0 - contrast) + brightness);
      }
    }
  }

  if (cfg.erase_prob > 0.0 && rng.bernoulli(cfg.erase_prob)) {
    const double max_area = cfg.erase_max_frac * kImagePixels;
    const double area = rng.uniform(0.0, 1.0) * max_area;
    const double aspect = std::exp(rng.uniform(std::log(0.3), std::log(1.0 / 0.3)));
    int h = std::clamp(static_cast<int>(std::sqrt(area * aspect)), 1, kImageSize);
    int w = std::clamp(static_cast<int>(std::sqrt(area / aspect)), 1, kImageSize);
    while (h * w > max_area && (h > 1 || w > 1)) {
      if (h >= w) --h; else --w;
    }
    if (h * w <= max_area) {
      const int r0 = rng.uniform_int(0, kImageSize - h);
      const int c0 = rng.uniform_int(0, kImageSize - w);
      for (int r = r0; r < r0 + h; ++r)
        for (int c = c0; c < c0 + w; ++c)
          for (int k2 = 0; k2 < ch; ++k2) image.at(r, c, k2) = 0.0f;
    }
  }

  for (float& v : image.data) v = std::clamp(v, 0.0f, 1.0f);
  return image;
}

ProcessedImage process_frame(const TactileFrame& frame, const TactileFrame& canonical,
                             const ReprConfig& cfg, Rng* aug_rng, double phi_offset) {
  ProcessedImage img;
  switch (cfg.mode) {
    case ReprMode::kRgb:
      img = frame.rgb;
      break;
    case ReprMode::kDiff:
      img = diff_image(frame.rgb, canonical.rgb);
      break;
    case ReprMode::kBinary:
      img = binarize(diff_image(frame.rgb, canonical.rgb),
                     std::clamp(cfg.phi + phi_offset, 1e-6, 1.0 - 1e-6));
      break;
  }
  img = flip_right(std::move(img), frame.sensor);
  if (aug_rng != nullptr && cfg.augment) img = augment(std::move(img), cfg, *aug_rng);
  return img;
}

}  // namespace pivot
