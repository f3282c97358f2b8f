#include "pivot/scene.h"

#include <gtest/gtest.h>

#include <set>

#include "pivot/errors.h"

namespace pivot {
namespace {

TEST(SceneTest, SampleWithinTaskRanges) {
  Rng rng(0);
  const auto spec = sample_scene(rng, {kAllFamilies.begin(), kAllFamilies.end()});
  EXPECT_GE(spec.table_height, 0.0);
  EXPECT_LE(spec.table_height, 0.20);
  EXPECT_GE(spec.object.length, 0.13);
  EXPECT_LE(spec.object.length, 0.18);
  EXPECT_GE(spec.init_rel_angle, deg_to_rad(165.0));
  EXPECT_LE(spec.init_rel_angle, deg_to_rad(195.0));
  EXPECT_GE(spec.target_rel_angle, deg_to_rad(90.0));
  EXPECT_LE(spec.target_rel_angle, deg_to_rad(150.0));
}

TEST(SceneTest, SingletonFamily) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_scene(rng, {Family::kRod}).object.family, Family::kRod);
}

TEST(SceneTest, EmptyFamilySetRejected) {
  Rng rng(1);
  EXPECT_THROW(sample_scene(rng, {}), ConfigError);
}

TEST(SceneTest, MonteCarloRangeCoverage) {
  Rng rng(2);
  const TaskRanges r;
  struct Acc {
    double lo = 1e9, hi = -1e9;
    void add(double v) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  } table, length, init, target, grasp;
  std::map<Family, int> families;
  for (int i = 0; i < 10000; ++i) {
    const auto s = sample_scene(rng, {kAllFamilies.begin(), kAllFamilies.end()});
    table.add(s.table_height);
    length.add(s.object.length);
    init.add(s.init_rel_angle);
    target.add(s.target_rel_angle);
    grasp.add(s.object.grasp_fraction);
    ++families[s.object.family];
    ASSERT_TRUE(r.table_height.contains(s.table_height));
    ASSERT_TRUE(r.length.contains(s.object.length));
    ASSERT_TRUE(r.init_rel_angle.contains(s.init_rel_angle));
    ASSERT_TRUE(r.target_rel_angle.contains(s.target_rel_angle));
    ASSERT_TRUE(r.grasp_fraction.contains(s.object.grasp_fraction));
  }
  auto near_ends = [](const Acc& a, const Range& range) {
    const double tol = 0.01 * (range.hi - range.lo);
    EXPECT_LT(a.lo - range.lo, tol);
    EXPECT_LT(range.hi - a.hi, tol);
  };
  near_ends(table, r.table_height);
  near_ends(length, r.length);
  near_ends(init, r.init_rel_angle);
  near_ends(target, r.target_rel_angle);
  near_ends(grasp, r.grasp_fraction);
  for (Family f : kAllFamilies) {
    EXPECT_GT(families[f], 1800) << family_name(f);
    EXPECT_LT(families[f], 2200) << family_name(f);
  }
}

TEST(SceneTest, DeterministicGivenSeed) {
  Rng a(77), b(77);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_scene(a, {Family::kBottle, Family::kWedge}),
                                         sample_scene(b, {Family::kBottle, Family::kWedge}));
}

TEST(SceneTest, DistinctSeedsDistinctScenes) {
  std::set<double> heights;
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    heights.insert(sample_scene(rng, {kAllFamilies.begin(), kAllFamilies.end()}).table_height);
  }
  EXPECT_EQ(heights.size(), 1000u);
}

TEST(SceneTest, RodProfileConstant) {
  Rng rng(3);
  const auto rod = make_object(Family::kRod, rng);
  for (int i = 0; i <= 100; ++i)
    EXPECT_EQ(rod.half_width(rod.length * i / 100.0), rod.width / 2.0);
}

TEST(SceneTest, WedgeTapers) {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto w = make_object(Family::kWedge, rng);
    EXPECT_NE(w.half_width(0.0), w.half_width(w.length));
  }
}

TEST(SceneTest, ProfilesPositiveAndContinuous) {
  Rng rng(5);
  for (Family f : kAllFamilies) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto shape = make_object(f, rng);
      double prev = shape.half_width(0.0);
      const int n = 2000;
      for (int i = 0; i <= n; ++i) {
        const double hw = shape.half_width(shape.length * i / n);
        EXPECT_GT(hw, 0.0) << family_name(f);
        // Profiles ramp over at least a millimetre, so 75 um steps change
        // the half-width by a bounded amount.
        EXPECT_LT(std::abs(hw - prev), 0.0015) << family_name(f);
        prev = hw;
      }
    }
  }
}

TEST(SceneTest, FamilyProfilesHaveCharacteristicFeatures) {
  Rng rng(6);
  const auto tbar = make_object(Family::kTBar, rng);
  EXPECT_GT(tbar.half_width(0.001), tbar.half_width(tbar.length * 0.6));
  const auto hammer = make_object(Family::kHammer, rng);
  EXPECT_GT(hammer.half_width(hammer.length - 0.001), hammer.half_width(hammer.length * 0.5));
  const auto bottle = make_object(Family::kBottle, rng);
  EXPECT_GT(bottle.half_width(bottle.length - 0.001), bottle.half_width(0.001));
}

TEST(SceneTest, TipOffset) {
  ObjectShape s;
  s.length = 0.15;
  s.grasp_fraction = 0.2;
  EXPECT_NEAR(tip_offset(s), 0.12, 1e-15);
  s.grasp_fraction = 1e-12;
  EXPECT_NEAR(tip_offset(s), s.length, 1e-12);
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto o = make_object(kAllFamilies[i % 5], rng);
    EXPECT_GE(tip_offset(o), 0.7 * 0.13);
    EXPECT_LE(tip_offset(o), 0.9 * 0.18);
  }
}

TEST(SceneTest, FamilyNames) {
  for (Family f : kAllFamilies) EXPECT_EQ(parse_family(family_name(f)), f);
  EXPECT_FALSE(parse_family("teapot").has_value());
}

}  // namespace
}  // namespace pivot
