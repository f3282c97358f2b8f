#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pivot/rng.h"
#include "pivot/units.h"

namespace pivot {

// Procedural planar object families.
enum class Family { kRod, kWedge, kTBar, kBottle, kHammer };

inline constexpr std::array<Family, 5> kAllFamilies = {
    Family::kRod, Family::kWedge, Family::kTBar, Family::kBottle, Family::kHammer};

std::string_view family_name(Family f);
std::optional<Family> parse_family(std::string_view name);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

// Randomization ranges for scene sampling. Stored in SI units.
struct TaskRanges {
  Range table_height{0.0, 0.20};
  Range length{0.13, 0.18};
  Range init_rel_angle{deg_to_rad(165.0), deg_to_rad(195.0)};
  Range target_rel_angle{deg_to_rad(90.0), deg_to_rad(150.0)};
  Range grasp_fraction{0.10, 0.30};
  Range width{0.006, 0.012};
  // Initial clearance between the object tip and the table.
  Range tip_clearance{0.01, 0.03};
};

// A planar object: a family-specific half-width profile along its axis. The
// axial coordinate s runs from the near end (s = 0) to the pivoting tip
// (s = length). The grasp point sits at s = grasp_fraction * length.
struct ObjectShape {
  Family family = Family::kRod;
  double length = 0.15;
  double width = 0.008;
  double grasp_fraction = 0.2;
  // Family feature parameters. Unused for rods.
  double feature_width = 0.008;
  double feature_start = 0.0;
  double feature_end = 0.0;

  double half_width(double s) const;
  double grasp_s() const { return grasp_fraction * length; }
  friend bool operator==(const ObjectShape&, const ObjectShape&) = default;
};

struct SceneSpec {
  ObjectShape object;
  double table_height = 0.0;
  double init_rel_angle = kPi;
  double target_rel_angle = deg_to_rad(120.0);
  uint64_t seed = 0;
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

ObjectShape make_object(Family family, Rng& rng, const TaskRanges& ranges = {});

// Throws ConfigError when `families` is empty.
SceneSpec sample_scene(Rng& rng, const std::vector<Family>& families,
                       const TaskRanges& ranges = {});

// Distance from the grasp point to the pivoting tip.
inline double tip_offset(const ObjectShape& shape) {
  return (1.0 - shape.grasp_fraction) * shape.length;
}

}  // namespace pivot
