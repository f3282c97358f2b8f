#include "pivot/tacrender.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

namespace pivot {
namespace {

constexpr float kDepthFloor = 1e-6f;

// Rotation about the gray axis (1,1,1)/sqrt(3).
std::array<double, 3> rotate_hue(const std::array<double, 3>& rgb, double angle) {
  if (angle == 0.0) return rgb;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double k = (1.0 - c) / 3.0;
  const double r3 = s / std::sqrt(3.0);
  const double a = c + k;
  const double b = k - r3;
  const double d = k + r3;
  return {a * rgb[0] + b * rgb[1] + d * rgb[2], d * rgb[0] + a * rgb[1] + b * rgb[2],
          b * rgb[0] + d * rgb[1] + a * rgb[2]};
}

// Fixed low-amplitude texture standing in for gel printing/background glare.
double background_texture(int r, int c, int ch) {
  const double phase = 0.7 * ch;
  return 0.04 * std::sin(0.37 * c + 0.23 * r + phase) + 0.03 * std::cos(0.11 * r - 0.29 * c + phase);
}

}  // namespace

std::vector<Light> RenderConfig::lights() const {
  std::vector<Light> out;
  out.reserve(light_azimuths.size());
  const double ce = std::cos(light_elevation);
  const double se = std::sin(light_elevation);
  for (size_t i = 0; i < light_azimuths.size(); ++i) {
    Light l;
    const double lx = ce * std::cos(light_azimuths[i]);
    l.direction = {mirror_lights ? -lx : lx, ce * std::sin(light_azimuths[i]), se};
    const auto hued = rotate_hue(light_colors[i], hue_shift);
    for (int ch = 0; ch < 3; ++ch) l.color[ch] = std::max(0.0, hued[ch]) * light_intensity;
    out.push_back(l);
  }
  return out;
}

Image rasterize_patch(const PatchGeometry& patch, const RenderConfig& cfg) {
  Image mask(1);
  if (patch.empty) return mask;
  for (int r = 0; r < kImageSize; ++r) {
    const double v = pixel_v(r, cfg);
    for (int c = 0; c < kImageSize; ++c) {
      if (patch.contains(pixel_u(c, cfg), v)) mask.at(r, c) = 1.0f;
    }
  }
  return mask;
}

std::vector<double> gaussian_kernel(double sigma_px) {
  if (sigma_px <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_px));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma_px * sigma_px));
    sum += k[i + radius];
  }
  for (double& w : k) w /= sum;
  return k;
}

void gaussian_smooth(HeightMap& map, double sigma_px) {
  const auto k = gaussian_kernel(sigma_px);
  const int radius = static_cast<int>(k.size() / 2);
  if (radius == 0) return;
  std::vector<double> tmp(kImagePixels);
  // Horizontal pass.
  for (int r = 0; r < kImageSize; ++r) {
    for (int c = 0; c < kImageSize; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int cc = std::clamp(c + i, 0, kImageSize - 1);
        acc += k[i + radius] * map.at(r, cc);
      }
      tmp[r * kImageSize + c] = acc;
    }
  }
  // Vertical pass.
  for (int r = 0; r < kImageSize; ++r) {
    for (int c = 0; c < kImageSize; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int rr = std::clamp(r + i, 0, kImageSize - 1);
        acc += k[i + radius] * tmp[rr * kImageSize + c];
      }
      map.at(r, c) = static_cast<float>(acc);
    }
  }
}

HeightMap heightmap_from_patch(const PatchGeometry& patch, const RenderConfig& cfg) {
  HeightMap map;
  if (patch.empty) return map;
  const float depth =
      static_cast<float>(std::clamp(patch.depth * cfg.depth_scale, 0.0, cfg.d_max));
  const Image mask = rasterize_patch(patch, cfg);
  for (int i = 0; i < kImagePixels; ++i) map.values[i] = mask.data[i] > 0.0f ? depth : 0.0f;
  gaussian_smooth(map, cfg.sigma_gel_px);
  const float d_max = static_cast<float>(cfg.d_max);
  for (float& h : map.values) {
    h = h < kDepthFloor ? 0.0f : std::min(h, d_max);
  }
  return map;
}

std::array<double, 3> shade_normal(const std::array<double, 3>& n, const std::vector<Light>& lights,
                                   const RenderConfig& cfg) {
  std::array<double, 3> out;
  for (int ch = 0; ch < 3; ++ch) out[ch] = cfg.k_a * cfg.ambient[ch];
  for (const Light& l : lights) {
    const auto& d = l.direction;
    const double ndotl = n[0] * d[0] + n[1] * d[1] + n[2] * d[2];
    const double diffuse = cfg.k_d * std::max(0.0, ndotl);
    // r = 2 (n.l) n - l; with the viewer on +z only r_z matters.
    const double r_z = 2.0 * ndotl * n[2] - d[2];
    const double specular = cfg.k_s * std::pow(std::max(0.0, r_z), cfg.shininess);
    for (int ch = 0; ch < 3; ++ch) out[ch] += (diffuse + specular) * l.color[ch];
  }
  return out;
}

TactileFrame render_phong(const HeightMap& height, const RenderConfig& cfg, Sensor sensor) {
  TactileFrame frame;
  frame.height = height;
  frame.sensor = sensor;
  const auto lights = cfg.lights();
  const double two_pu = 2.0 * cfg.pixel_pitch_u();
  const double two_pv = 2.0 * cfg.pixel_pitch_v();
  const int last = kImageSize - 1;
  // Untouched gel dominates the window; its shade is computed once.
  const auto flat = shade_normal({0.0, 0.0, 1.0}, lights, cfg);
  for (int r = 0; r < kImageSize; ++r) {
    const int up = std::max(r - 1, 0);
    const int down = std::min(r + 1, last);
    for (int c = 0; c < kImageSize; ++c) {
      const int left = std::max(c - 1, 0);
      const int right = std::min(c + 1, last);
      const double dhdx = (static_cast<double>(height.at(r, right)) - height.at(r, left)) / two_pu;
      // +y points up the image (decreasing row).
      const double dhdy = (static_cast<double>(height.at(up, c)) - height.at(down, c)) / two_pv;
      std::array<double, 3> rgb = flat;
      if (dhdx != 0.0 || dhdy != 0.0) {
        const double inv = 1.0 / std::sqrt(dhdx * dhdx + dhdy * dhdy + 1.0);
        rgb = shade_normal({-dhdx * inv, -dhdy * inv, inv}, lights, cfg);
      }
      for (int ch = 0; ch < 3; ++ch) {
        double v = rgb[ch] * cfg.gain;
        if (cfg.background) v += background_texture(r, c, ch);
        frame.rgb.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return frame;
}

TactileFrame canonical_image(const RenderConfig& cfg) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const TactileFrame>> cache;
  std::ostringstream key;
  key.precision(17);
  key << cfg.window_width << ' ' << cfg.window_height << ' ' << cfg.k_a << ' ' << cfg.k_d << ' '
      << cfg.k_s << ' ' << cfg.shininess << ' ' << cfg.light_elevation << ' '
      << cfg.light_intensity << ' ' << cfg.mirror_lights << ' ' << cfg.hue_shift << ' '
      << cfg.gain << ' ' << cfg.background;
  for (double a : cfg.ambient) key << ' ' << a;
  for (double a : cfg.light_azimuths) key << ' ' << a;
  for (const auto& col : cfg.light_colors)
    for (double a : col) key << ' ' << a;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key.str());
    if (it != cache.end()) return *it->second;
  }
  auto frame = std::make_shared<const TactileFrame>(render_phong(HeightMap{}, cfg));
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key.str(), frame);
  return *frame;
}

void add_pixel_noise(Image& img, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (float& v : img.data) {
    v = static_cast<float>(std::clamp(v + rng.normal(0.0, sigma), 0.0, 1.0));
  }
}

}  // namespace pivot
