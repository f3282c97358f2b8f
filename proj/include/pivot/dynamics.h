#pragma once

#include <cmath>

#include "pivot/scene.h"
#include "pivot/units.h"

namespace pivot {

// Quasi-static planar model constants. Angles in radians, lengths in meters.
struct DynamicsConfig {
  double step_xz = 0.005;
  double step_pitch = deg_to_rad(2.0);
  // Wrist-to-fingertip distance; the grasp point sits at the fingertip.
  double finger_length = 0.05;
  // Minimum height of the grasp point above the table.
  double clearance_min = 0.005;
  double pitch_limit = deg_to_rad(60.0);
  double x_limit = 0.3;
  double k_table = 2000.0;  // N/m
  double k_f = 1e-4;        // m/N
  double d_grip = 0.4e-3;   // m
  double d_max = 1.5e-3;    // m
  double max_rel_step = deg_to_rad(30.0);
  // Reachable cone for the relative angle.
  double rel_min = deg_to_rad(10.0);
  double rel_max = deg_to_rad(350.0);
  // Optional gravity slip at the gel. Rotation toward hanging at
  // slip_rate * (|sin(psi)| - slip_threshold) per step when not in contact.
  bool slip = false;
  double slip_rate = deg_to_rad(2.0);
  double slip_threshold = 0.5;
};

struct SceneState {
  double gripper_x = 0.0;
  double gripper_z = 0.3;
  double gripper_pitch = 0.0;  // rotation about y
  // Object axis relative to the gripper axis; pi means hanging straight down
  // from the fingertips.
  double rel_angle = kPi;
  bool table_contact = false;
  double table_normal_force = 0.0;
  ObjectShape shape;
  double table_height = 0.0;
  bool grasped = true;
  friend bool operator==(const SceneState&, const SceneState&) = default;
};

// Normalized gripper command; components are clamped to [-1, 1] before use.
struct Action {
  double dx = 0.0;
  double dz = 0.0;
  double dpitch = 0.0;
  Action clamped() const;
  double squared_norm() const { return dx * dx + dz * dz + dpitch * dpitch; }
};

struct StepInfo {
  bool blocked = false;
  double penetration = 0.0;  // before projection
};

struct Vec2 {
  double x = 0.0;
  double z = 0.0;
};

// Direction of angle psi in the xz-plane: psi = 0 points up (+z), psi = pi/2
// points toward +x.
inline Vec2 axis_direction(double psi);

Vec2 grasp_position(const SceneState& s, const DynamicsConfig& cfg);
Vec2 tip_position(const SceneState& s, const DynamicsConfig& cfg);

// Object hanging at `spec.init_rel_angle`, pitch 0, tip `tip_clearance` above
// the table.
SceneState initial_state(const SceneSpec& spec, double tip_clearance, const DynamicsConfig& cfg);

SceneState step_dynamics(const SceneState& state, const Action& action, const DynamicsConfig& cfg,
                         StepInfo* info = nullptr);

enum class Sensor { kLeft, kRight };

// Object cross-section seen by one fingertip sensor. Coordinates (u, v) are
// meters in the sensor plane with the grasp point at the origin, u to the
// right and v toward the wrist. The right sensor sees the mirrored region.
struct PatchGeometry {
  bool empty = true;
  ObjectShape shape;
  double rel_angle = kPi;
  bool mirrored = false;
  double depth = 0.0;

  bool contains(double u, double v) const;
};

PatchGeometry contact_patch(const SceneState& s, Sensor sensor, const DynamicsConfig& cfg);

inline Vec2 axis_direction(double psi) { return {std::sin(psi), std::cos(psi)}; }

}  // namespace pivot
