#include "pivot/dynamics.h"

#include <gtest/gtest.h>

#include <cmath>

namespace pivot {
namespace {

const DynamicsConfig kCfg;

SceneState hanging_rod(double clearance) {
  SceneSpec spec;
  spec.object.length = 0.15;
  spec.object.grasp_fraction = 0.2;
  spec.table_height = 0.05;
  spec.init_rel_angle = kPi;
  return initial_state(spec, clearance, kCfg);
}

double tip_z(const SceneState& s) { return tip_position(s, kCfg).z; }

TEST(DynamicsTest, HangingTipDirectlyBelowGrasp) {
  SceneState s;
  s.rel_angle = kPi;
  const Vec2 g = grasp_position(s, kCfg);
  const Vec2 t = tip_position(s, kCfg);
  EXPECT_NEAR(t.x, g.x, 1e-15);
  EXPECT_NEAR(g.z - t.z, tip_offset(s.shape), 1e-15);
}

TEST(DynamicsTest, QuarterTurnIsHorizontal) {
  SceneState s;
  s.rel_angle = kPi / 2;
  const Vec2 g = grasp_position(s, kCfg);
  const Vec2 t = tip_position(s, kCfg);
  EXPECT_NEAR(t.z, g.z, 1e-15);
  EXPECT_NEAR(std::abs(t.x - g.x), tip_offset(s.shape), 1e-15);
}

TEST(DynamicsTest, TipMatchesRotationOracle) {
  SceneState s;
  s.gripper_x = 0.1;
  s.gripper_z = 0.3;
  s.gripper_pitch = deg_to_rad(10.0);
  s.rel_angle = deg_to_rad(170.0);
  s.shape.length = 0.15;
  s.shape.grasp_fraction = 0.2;
  // Rotate the finger axis (0, -finger) and the object axis (0, L) by the
  // gripper pitch with an explicit 2x2 matrix.
  auto rotate = [](double angle, double x, double z) {
    const double c = std::cos(angle), si = std::sin(angle);
    return Vec2{c * x + si * z, -si * x + c * z};
  };
  const Vec2 f = rotate(s.gripper_pitch, 0.0, -kCfg.finger_length);
  const Vec2 o = rotate(s.gripper_pitch + s.rel_angle, 0.0, 0.12);
  const Vec2 t = tip_position(s, kCfg);
  EXPECT_NEAR(t.x, 0.1 + f.x + o.x, 1e-14);
  EXPECT_NEAR(t.z, 0.3 + f.z + o.z, 1e-14);
}

TEST(DynamicsTest, IdentityActionWithoutContact) {
  const SceneState s = hanging_rod(0.02);
  StepInfo info;
  const SceneState next = step_dynamics(s, Action{}, kCfg, &info);
  EXPECT_EQ(next, s);
  EXPECT_FALSE(next.table_contact);
  EXPECT_FALSE(info.blocked);
}

TEST(DynamicsTest, ActionsClamped) {
  const SceneState s = hanging_rod(0.02);
  const auto a = step_dynamics(s, Action{5.0, 0.0, 0.0}, kCfg);
  const auto b = step_dynamics(s, Action{1.0, 0.0, 0.0}, kCfg);
  EXPECT_EQ(a, b);
}

// Dense sweep over rel for the angle where the tip just touches the table.
double sweep_contact_angle(const SceneState& s, double from, double to) {
  const int n = 2000000;
  double best = from;
  double best_err = 1e9;
  for (int i = 0; i <= n; ++i) {
    SceneState probe = s;
    probe.rel_angle = from + (to - from) * i / n;
    const double err = std::abs(tip_z(probe) - s.table_height);
    if (err < best_err) {
      best_err = err;
      best = probe.rel_angle;
    }
  }
  return best;
}

TEST(DynamicsTest, PressDownRotatesToTableContact) {
  SceneState s = hanging_rod(0.001);
  s.rel_angle = deg_to_rad(185.0);
  const double gap = tip_z(s) - s.table_height;
  const SceneState next = step_dynamics(s, Action{0.0, -1.0, 0.0}, kCfg);
  EXPECT_TRUE(next.table_contact);
  EXPECT_NEAR(tip_z(next), next.table_height, 1e-9);
  EXPECT_GE(tip_z(next), next.table_height - 1e-12);
  EXPECT_NE(next.rel_angle, s.rel_angle);
  // sin(psi) < 0 at 185 deg, so rel increases.
  EXPECT_GT(next.rel_angle, s.rel_angle);
  SceneState probe = next;
  const double oracle = sweep_contact_angle(probe, s.rel_angle, s.rel_angle + deg_to_rad(30.0));
  EXPECT_NEAR(next.rel_angle, oracle, 1e-6);
  EXPECT_NEAR(next.table_normal_force, kCfg.k_table * (kCfg.step_xz - gap), 1e-9);
}

TEST(DynamicsTest, ExactHangingTieBreaksTowardIncreasing) {
  SceneState s = hanging_rod(0.001);
  const SceneState next = step_dynamics(s, Action{0.0, -1.0, 0.0}, kCfg);
  EXPECT_TRUE(next.table_contact);
  EXPECT_GT(next.rel_angle, kPi);
}

TEST(DynamicsTest, RepeatedPressLateralMonotone) {
  SceneState s = hanging_rod(0.002);
  s.rel_angle = deg_to_rad(175.0);
  double prev = s.rel_angle;
  int contact_steps = 0;
  for (int i = 0; i < 40; ++i) {
    s = step_dynamics(s, Action{0.6, -1.0, 0.0}, kCfg);
    if (s.table_contact) {
      ++contact_steps;
      EXPECT_LE(s.rel_angle, prev + 1e-15);
    }
    prev = s.rel_angle;
  }
  EXPECT_GT(contact_steps, 5);
  EXPECT_LT(s.rel_angle, deg_to_rad(160.0));
}

TEST(DynamicsTest, BlockedWhenConeExhausted) {
  DynamicsConfig cfg = kCfg;
  cfg.max_rel_step = deg_to_rad(0.5);
  SceneState s = hanging_rod(0.0005);
  s.rel_angle = deg_to_rad(181.0);
  StepInfo info;
  const SceneState next = step_dynamics(s, Action{0.0, -1.0, 0.0}, cfg, &info);
  EXPECT_TRUE(info.blocked);
  EXPECT_GT(next.gripper_z, s.gripper_z - cfg.step_xz);
  EXPECT_GE(tip_position(next, cfg).z, next.table_height - 1e-9);
}

TEST(DynamicsTest, GraspStaysAboveClearance) {
  SceneState s = hanging_rod(0.01);
  s.rel_angle = deg_to_rad(100.0);
  for (int i = 0; i < 100; ++i) s = step_dynamics(s, Action{0.0, -1.0, 0.0}, kCfg);
  EXPECT_GE(grasp_position(s, kCfg).z, s.table_height + kCfg.clearance_min - 1e-12);
}

TEST(DynamicsTest, RandomActionFuzzInvariants) {
  Rng rng(123);
  for (int scene = 0; scene < 100; ++scene) {
    const SceneSpec spec = sample_scene(rng, {kAllFamilies.begin(), kAllFamilies.end()});
    SceneState s = initial_state(spec, rng.uniform(0.01, 0.03), kCfg);
    for (int t = 0; t < 1000; ++t) {
      Action a{rng.uniform(-1.2, 1.2), rng.uniform(-1.5, 1.0), rng.uniform(-1.2, 1.2)};
      const SceneState next = step_dynamics(s, a, kCfg);
      ASSERT_GE(tip_z(next), next.table_height - 1e-9) << scene << ":" << t;
      ASSERT_LE(std::abs(next.rel_angle - s.rel_angle), deg_to_rad(30.0) + 1e-12);
      ASSERT_GT(next.rel_angle, 0.0);
      ASSERT_LT(next.rel_angle, 2 * kPi);
      ASSERT_GE(next.table_normal_force, 0.0);
      ASSERT_EQ(next.table_normal_force > 0.0, next.table_contact);
      s = next;
    }
  }
}

TEST(DynamicsTest, StepIsBitDeterministic) {
  Rng rng(9);
  const SceneSpec spec = sample_scene(rng, {kAllFamilies.begin(), kAllFamilies.end()});
  SceneState a = initial_state(spec, 0.015, kCfg), b = a;
  for (int t = 0; t < 500; ++t) {
    const Action act{rng.uniform(-1, 1), rng.uniform(-1, 0.5), rng.uniform(-1, 1)};
    a = step_dynamics(a, act, kCfg);
    b = step_dynamics(b, act, kCfg);
    ASSERT_EQ(a, b);
  }
}

SceneState reflect(const SceneState& s) {
  SceneState r = s;
  r.gripper_x = -s.gripper_x;
  r.gripper_pitch = -s.gripper_pitch;
  r.rel_angle = 2 * kPi - s.rel_angle;
  return r;
}

TEST(DynamicsTest, MirrorSymmetry) {
  Rng rng(10);
  for (int scene = 0; scene < 20; ++scene) {
    const SceneSpec spec = sample_scene(rng, {kAllFamilies.begin(), kAllFamilies.end()});
    SceneState s = initial_state(spec, 0.01, kCfg);
    s.rel_angle = spec.init_rel_angle == kPi ? kPi + 0.01 : spec.init_rel_angle;
    SceneState m = reflect(s);
    for (int t = 0; t < 200; ++t) {
      const Action a{rng.uniform(-1, 1), rng.uniform(-1, 0.3), rng.uniform(-1, 1)};
      s = step_dynamics(s, a, kCfg);
      m = step_dynamics(m, Action{-a.dx, a.dz, -a.dpitch}, kCfg);
      const SceneState back = reflect(m);
      ASSERT_NEAR(back.gripper_x, s.gripper_x, 1e-12);
      ASSERT_NEAR(back.gripper_z, s.gripper_z, 1e-12);
      ASSERT_NEAR(back.gripper_pitch, s.gripper_pitch, 1e-12);
      ASSERT_NEAR(back.rel_angle, s.rel_angle, 1e-12) << scene << ":" << t;
      ASSERT_EQ(back.table_contact, s.table_contact);
      ASSERT_NEAR(back.table_normal_force, s.table_normal_force, 1e-12);
    }
  }
}

TEST(DynamicsTest, PatchDepthLinearInForce) {
  SceneState s = hanging_rod(0.01);
  auto p = contact_patch(s, Sensor::kLeft, kCfg);
  EXPECT_FALSE(p.empty);
  EXPECT_DOUBLE_EQ(p.depth, 0.4e-3);
  s.table_normal_force = 2.0;
  EXPECT_NEAR(contact_patch(s, Sensor::kLeft, kCfg).depth, 0.6e-3, 1e-15);
  s.table_normal_force = 100.0;
  EXPECT_EQ(contact_patch(s, Sensor::kLeft, kCfg).depth, kCfg.d_max);
  s.grasped = false;
  EXPECT_TRUE(contact_patch(s, Sensor::kLeft, kCfg).empty);
}

TEST(DynamicsTest, RodPatchVerticalWhenHanging) {
  SceneState s = hanging_rod(0.01);
  const auto p = contact_patch(s, Sensor::kLeft, kCfg);
  const double hw = s.shape.half_width(0.0);
  EXPECT_TRUE(p.contains(0.0, -0.01));
  EXPECT_TRUE(p.contains(hw * 0.9, -0.01));
  EXPECT_FALSE(p.contains(hw * 1.1, -0.01));
  EXPECT_TRUE(p.contains(0.0, 0.005));
  EXPECT_FALSE(p.contains(0.0, s.shape.grasp_s() + 0.001));
}

TEST(DynamicsTest, RightPatchMirrorsLeft) {
  SceneState s = hanging_rod(0.01);
  s.rel_angle = deg_to_rad(150.0);
  const auto left = contact_patch(s, Sensor::kLeft, kCfg);
  const auto right = contact_patch(s, Sensor::kRight, kCfg);
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const double u = rng.uniform(-0.01, 0.01), v = rng.uniform(-0.0125, 0.0125);
    EXPECT_EQ(left.contains(u, v), right.contains(-u, v));
  }
}

}  // namespace
}  // namespace pivot
