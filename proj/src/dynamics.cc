#include "pivot/dynamics.h"

#include <algorithm>
#include <cmath>

namespace pivot {
namespace {

constexpr double kTwoPi = 2.0 * kPi;
constexpr int kMaxBisection = 100;
// |sin(psi)| below this counts as the bottom of the arc.
constexpr double kApexTolerance = 1e-12;

double wrap_two_pi(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

// Largest rotation magnitude allowed in direction `dir` (+1 / -1) before the
// cone limit, the per-step limit, or the apex of tip height is reached.
double rotation_limit(double rel, double psi, int dir, const DynamicsConfig& cfg) {
  double limit = cfg.max_rel_step;
  limit = std::min(limit, dir < 0 ? rel - cfg.rel_min : cfg.rel_max - rel);
  const double w = wrap_two_pi(psi);
  limit = std::min(limit, dir < 0 ? w : kTwoPi - w);
  return std::max(limit, 0.0);
}

// Smallest delta in [0, hi] with f(delta) >= 0, assuming f(0) < 0 <= f(hi) and
// f increasing. Runs until the bracket collapses to adjacent doubles.
template <typename F>
double bisect(F&& f, double hi) {
  double lo = 0.0;
  for (int i = 0; i < kMaxBisection; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) >= 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace

Action Action::clamped() const {
  return {std::clamp(dx, -1.0, 1.0), std::clamp(dz, -1.0, 1.0), std::clamp(dpitch, -1.0, 1.0)};
}

Vec2 grasp_position(const SceneState& s, const DynamicsConfig& cfg) {
  const Vec2 up = axis_direction(s.gripper_pitch);
  return {s.gripper_x - cfg.finger_length * up.x, s.gripper_z - cfg.finger_length * up.z};
}

Vec2 tip_position(const SceneState& s, const DynamicsConfig& cfg) {
  const Vec2 g = grasp_position(s, cfg);
  const Vec2 d = axis_direction(s.gripper_pitch + s.rel_angle);
  const double L = tip_offset(s.shape);
  return {g.x + L * d.x, g.z + L * d.z};
}

SceneState initial_state(const SceneSpec& spec, double tip_clearance, const DynamicsConfig& cfg) {
  SceneState s;
  s.shape = spec.object;
  s.table_height = spec.table_height;
  s.rel_angle = spec.init_rel_angle;
  s.gripper_pitch = 0.0;
  s.gripper_x = 0.0;
  const double grasp_z =
      spec.table_height + tip_clearance - tip_offset(spec.object) * std::cos(spec.init_rel_angle);
  s.gripper_z = grasp_z + cfg.finger_length;
  return s;
}

SceneState step_dynamics(const SceneState& state, const Action& action, const DynamicsConfig& cfg,
                         StepInfo* info) {
  const Action a = action.clamped();
  SceneState s = state;
  StepInfo local;

  s.gripper_x = std::clamp(s.gripper_x + a.dx * cfg.step_xz, -cfg.x_limit, cfg.x_limit);
  s.gripper_z += a.dz * cfg.step_xz;
  s.gripper_pitch =
      std::clamp(s.gripper_pitch + a.dpitch * cfg.step_pitch, -cfg.pitch_limit, cfg.pitch_limit);
  const double min_z =
      s.table_height + cfg.clearance_min + cfg.finger_length * std::cos(s.gripper_pitch);
  s.gripper_z = std::max(s.gripper_z, min_z);

  s.table_contact = false;
  s.table_normal_force = 0.0;
  if (!s.grasped) {
    if (info) *info = local;
    return s;
  }

  const double L = tip_offset(s.shape);
  const double grasp_z = grasp_position(s, cfg).z;
  const double psi = s.gripper_pitch + s.rel_angle;
  const double tip_z = grasp_z + L * std::cos(psi);
  const double penetration = s.table_height - tip_z;

  if (penetration > 0.0) {
    local.penetration = penetration;
    // d(tip_z)/d(rel) = -L sin(psi); rotate the way that lifts the tip.
    // At the bottom of the arc the derivative vanishes; go toward increasing rel.
    const double sin_psi = std::sin(psi);
    const int dir = sin_psi > kApexTolerance ? -1 : 1;
    const double limit = rotation_limit(s.rel_angle, psi, dir, cfg);
    auto clearance = [&](double delta) {
      return grasp_z + L * std::cos(psi + dir * delta) - s.table_height;
    };
    const double at_limit = clearance(limit);
    double delta = limit;
    if (at_limit < 0.0) {
      // No admissible rotation resolves the penetration; lift the gripper.
      local.blocked = true;
      s.gripper_z -= at_limit;
    } else {
      delta = bisect(clearance, limit);
    }
    s.rel_angle += dir * delta;
    s.table_contact = true;
    s.table_normal_force = cfg.k_table * penetration;
  } else if (cfg.slip) {
    const double sin_psi = std::sin(psi);
    const double excess = std::abs(sin_psi) - cfg.slip_threshold;
    if (excess > 0.0) {
      // Gravity turns the object toward hanging (psi -> pi), lowering the tip.
      const int dir = sin_psi > 0.0 ? 1 : -1;
      const double to_hanging = std::abs(kPi - wrap_two_pi(psi));
      double limit = std::min({cfg.slip_rate * excess, to_hanging, cfg.max_rel_step,
                               dir < 0 ? s.rel_angle - cfg.rel_min : cfg.rel_max - s.rel_angle});
      limit = std::max(limit, 0.0);
      auto clearance = [&](double delta) {
        return grasp_z + L * std::cos(psi + dir * delta) - s.table_height;
      };
      if (clearance(limit) < 0.0) {
        // Stop where the tip reaches the table: largest delta with clearance >= 0.
        double lo = 0.0;
        double hi = limit;
        for (int i = 0; i < kMaxBisection; ++i) {
          const double mid = 0.5 * (lo + hi);
          if (mid <= lo || mid >= hi) break;
          if (clearance(mid) >= 0.0) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        limit = lo;
      }
      s.rel_angle += dir * limit;
    }
  }
  if (info) *info = local;
  return s;
}

bool PatchGeometry::contains(double u, double v) const {
  if (empty) return false;
  const double su = std::sin(rel_angle);
  const double cu = std::cos(rel_angle);
  // Axis toward the tip and its normal, in sensor coordinates.
  const double ax = mirrored ? -su : su;
  const double t = u * ax + v * cu;
  const double w = u * cu - v * ax;
  const double s = shape.grasp_s() + t;
  if (s < 0.0 || s > shape.length) return false;
  return std::abs(w) <= shape.half_width(s);
}

PatchGeometry contact_patch(const SceneState& s, Sensor sensor, const DynamicsConfig& cfg) {
  PatchGeometry patch;
  if (!s.grasped) return patch;
  patch.empty = false;
  patch.shape = s.shape;
  patch.rel_angle = s.rel_angle;
  patch.mirrored = sensor == Sensor::kRight;
  patch.depth = std::min(cfg.d_grip + cfg.k_f * s.table_normal_force, cfg.d_max);
  return patch;
}

}  // namespace pivot
