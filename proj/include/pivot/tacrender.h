#pragma once

#include <array>
#include <vector>

#include "pivot/dynamics.h"
#include "pivot/image.h"
#include "pivot/rng.h"
#include "pivot/units.h"

namespace pivot {

// 64x64 gel indentation depths in meters.
struct HeightMap {
  std::vector<float> values = std::vector<float>(kImagePixels, 0.0f);

  float& at(int r, int c) { return values[static_cast<size_t>(r) * kImageSize + c]; }
  float at(int r, int c) const { return values[static_cast<size_t>(r) * kImageSize + c]; }
  friend bool operator==(const HeightMap&, const HeightMap&) = default;
};

struct Light {
  std::array<double, 3> direction;  // unit vector toward the light
  std::array<double, 3> color;
};

struct RenderConfig {
  double window_width = 0.020;   // along u (image columns)
  double window_height = 0.025;  // along v (image rows)
  double sigma_gel_px = 2.0;
  double d_max = 1.5e-3;

  double k_a = 0.6;
  double k_d = 0.5;
  double k_s = 0.3;
  double shininess = 16.0;
  std::array<double, 3> ambient = {0.15, 0.15, 0.18};
  double light_elevation = deg_to_rad(70.0);
  std::array<double, 3> light_azimuths = {deg_to_rad(90.0), deg_to_rad(210.0), deg_to_rad(330.0)};
  std::array<std::array<double, 3>, 3> light_colors = {
      {{1.0, 0.3, 0.3}, {0.3, 1.0, 0.3}, {0.3, 0.3, 1.0}}};
  // Scales every light color. Keeps the flat-gel frame below saturation.
  double light_intensity = 0.5;
  // Reflect light directions across the vertical image axis.
  bool mirror_lights = false;

  // Sensor miscalibration knobs, identity by default.
  double hue_shift = 0.0;  // radians, rotation of light colors about gray
  double gain = 1.0;
  double depth_scale = 1.0;
  bool background = false;

  double pixel_pitch_u() const { return window_width / kImageSize; }
  double pixel_pitch_v() const { return window_height / kImageSize; }
  std::vector<Light> lights() const;
};

struct TactileFrame {
  Image rgb{3};
  HeightMap height;
  Sensor sensor = Sensor::kLeft;
};

// Sensor-plane coordinates (meters) of a pixel center. Symmetric about the
// window center so that mirrored patches rasterize to mirrored masks.
inline double pixel_u(int c, const RenderConfig& cfg) { return (c - 31.5) * cfg.pixel_pitch_u(); }
inline double pixel_v(int r, const RenderConfig& cfg) { return (31.5 - r) * cfg.pixel_pitch_v(); }

// Unsmoothed patch mask: 1 inside the patch, 0 outside.
Image rasterize_patch(const PatchGeometry& patch, const RenderConfig& cfg);

// Separable Gaussian with replicated borders. sigma_px <= 0 is the identity.
std::vector<double> gaussian_kernel(double sigma_px);
void gaussian_smooth(HeightMap& map, double sigma_px);

HeightMap heightmap_from_patch(const PatchGeometry& patch, const RenderConfig& cfg);

// Phong intensity for one surface normal (unit length), before clamping.
std::array<double, 3> shade_normal(const std::array<double, 3>& normal,
                                   const std::vector<Light>& lights, const RenderConfig& cfg);

TactileFrame render_phong(const HeightMap& height, const RenderConfig& cfg,
                          Sensor sensor = Sensor::kLeft);

// Flat-gel frame for `cfg`, computed once per distinct configuration.
TactileFrame canonical_image(const RenderConfig& cfg);

// Additive Gaussian pixel noise, clamped to [0, 1].
void add_pixel_noise(Image& img, double sigma, Rng& rng);

}  // namespace pivot
