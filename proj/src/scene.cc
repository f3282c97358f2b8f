#include "pivot/scene.h"

#include <algorithm>
#include <cmath>

#include "pivot/errors.h"

namespace pivot {
namespace {

// Width of the short ramp that keeps step-like profiles continuous.
constexpr double kRampLength = 0.001;

double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return 0.5 - 0.5 * std::cos(kPi * x);
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::kRod: return "rod";
    case Family::kWedge: return "wedge";
    case Family::kTBar: return "tbar";
    case Family::kBottle: return "bottle";
    case Family::kHammer: return "hammer";
  }
  return "unknown";
}

std::optional<Family> parse_family(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

double ObjectShape::half_width(double s) const {
  const double shaft = 0.5 * width;
  const double feature = 0.5 * feature_width;
  switch (family) {
    case Family::kRod:
      return shaft;
    case Family::kWedge:
      // Linear taper from the near end to the tip.
      return lerp(shaft, feature, std::clamp(s / length, 0.0, 1.0));
    case Family::kTBar:
      // Crossbar over [0, feature_end] at the near end.
      return lerp(feature, shaft, std::clamp((s - feature_end) / kRampLength, 0.0, 1.0));
    case Family::kBottle:
      // Narrow neck at the near end, shoulder over [feature_start, feature_end].
      return lerp(shaft, feature,
                  smoothstep01((s - feature_start) / (feature_end - feature_start)));
    case Family::kHammer:
      // Head from feature_start to the tip.
      return lerp(shaft, feature, std::clamp((s - feature_start) / kRampLength, 0.0, 1.0));
  }
  return shaft;
}

ObjectShape make_object(Family family, Rng& rng, const TaskRanges& ranges) {
  ObjectShape shape;
  shape.family = family;
  shape.length = ranges.length.sample(rng);
  shape.width = ranges.width.sample(rng);
  shape.grasp_fraction = ranges.grasp_fraction.sample(rng);
  const double L = shape.length;
  switch (family) {
    case Family::kRod:
      shape.feature_width = shape.width;
      break;
    case Family::kWedge:
      shape.feature_width = shape.width * rng.uniform(0.35, 0.7);
      break;
    case Family::kTBar:
      shape.feature_width = std::min(shape.width * rng.uniform(2.0, 2.8), 0.03);
      shape.feature_end = rng.uniform(0.015, 0.03);
      break;
    case Family::kBottle:
      shape.feature_width = shape.width * rng.uniform(1.8, 2.5);
      shape.feature_start = L * rng.uniform(0.2, 0.35);
      shape.feature_end = shape.feature_start + rng.uniform(0.008, 0.015);
      break;
    case Family::kHammer:
      shape.feature_width = shape.width * rng.uniform(2.5, 3.5);
      shape.feature_start = L - rng.uniform(0.02, 0.035);
      break;
  }
  return shape;
}

SceneSpec sample_scene(Rng& rng, const std::vector<Family>& families, const TaskRanges& ranges) {
  if (families.empty()) throw ConfigError("sample_scene: family set is empty");
  SceneSpec spec;
  spec.seed = rng.next_u64();
  const Family family =
      families[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(families.size()) - 1))];
  spec.object = make_object(family, rng, ranges);
  spec.table_height = ranges.table_height.sample(rng);
  spec.init_rel_angle = ranges.init_rel_angle.sample(rng);
  spec.target_rel_angle = ranges.target_rel_angle.sample(rng);
  return spec;
}

}  // namespace pivot
