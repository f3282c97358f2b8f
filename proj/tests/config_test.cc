#include "pivot/config.h"

#include <gtest/gtest.h>

#include "pivot/errors.h"

namespace pivot {
namespace {

TEST(Config, EmptyFileGivesDefaults) {
  const RunConfig a = parse_config("");
  const RunConfig b = parse_config("");
  EXPECT_EQ(a.digest, b.digest);
  EXPECT_EQ(a.digest_hex().size(), 16u);

  const EnvConfig env;
  EXPECT_EQ(a.env.ranges.table_height.hi, env.ranges.table_height.hi);
  EXPECT_EQ(a.env.ranges.length.lo, env.ranges.length.lo);
  EXPECT_EQ(a.env.ranges.length.hi, env.ranges.length.hi);
  EXPECT_EQ(a.env.ranges.init_rel_angle.lo, env.ranges.init_rel_angle.lo);
  EXPECT_EQ(a.env.ranges.target_rel_angle.hi, env.ranges.target_rel_angle.hi);
  EXPECT_EQ(a.env.ranges.width.lo, env.ranges.width.lo);
  EXPECT_EQ(a.env.ranges.tip_clearance.hi, env.ranges.tip_clearance.hi);
  EXPECT_EQ(a.env.families, env.families);
  EXPECT_EQ(a.env.obs, env.obs);
  EXPECT_EQ(a.env.horizon, env.horizon);
  EXPECT_EQ(a.env.reward.tip_target, env.reward.tip_target);
  EXPECT_EQ(a.env.dynamics.step_xz, env.dynamics.step_xz);
  EXPECT_EQ(a.env.dynamics.step_pitch, env.dynamics.step_pitch);
  EXPECT_EQ(a.env.dynamics.pitch_limit, env.dynamics.pitch_limit);
  EXPECT_EQ(a.env.dynamics.d_grip, env.dynamics.d_grip);
  EXPECT_EQ(a.env.dynamics.d_max, env.dynamics.d_max);
  EXPECT_EQ(a.env.dynamics.rel_max, env.dynamics.rel_max);
  EXPECT_EQ(a.env.render.window_height, env.render.window_height);
  EXPECT_EQ(a.env.render.light_elevation, env.render.light_elevation);
  EXPECT_EQ(a.env.render.d_max, env.render.d_max);
  EXPECT_EQ(a.env.repr.mode, env.repr.mode);
  EXPECT_EQ(a.env.repr.phi, env.repr.phi);
  EXPECT_EQ(a.env.repr.hue, env.repr.hue);

  const PpoConfig ppo;
  EXPECT_EQ(a.train.lr, ppo.lr);
  EXPECT_EQ(a.train.n_envs, ppo.n_envs);
  EXPECT_EQ(a.train.n_steps, ppo.n_steps);
  EXPECT_EQ(a.train.minibatch, ppo.minibatch);
  EXPECT_EQ(a.train.gae_lambda, ppo.gae_lambda);
  EXPECT_EQ(a.train.adam_eps, ppo.adam_eps);
  EXPECT_EQ(a.train.total_steps, ppo.total_steps);
  EXPECT_EQ(a.train.ent_coef, 0.0);
  EXPECT_EQ(a.eval.episodes, 200);
  EXPECT_EQ(a.eval.seeds, (std::vector<uint64_t>{0, 1, 2}));
  EXPECT_EQ(a.eval.phi_candidates.size(), 15u);
}

TEST(Config, DegreesConvertedToRadians) {
  const RunConfig c = parse_config("[task]\ntarget_deg_range = 90,150\n");
  EXPECT_NEAR(c.env.ranges.target_rel_angle.lo, kPi / 2, 1e-15);
  EXPECT_NEAR(c.env.ranges.target_rel_angle.hi, 5 * kPi / 6, 1e-15);
  const RunConfig d = parse_config("[task]\ntable_height_cm = 5, 15\n[dynamics]\nstep_xz_mm = 2\n");
  EXPECT_DOUBLE_EQ(d.env.ranges.table_height.lo, 0.05);
  EXPECT_DOUBLE_EQ(d.env.ranges.table_height.hi, 0.15);
  EXPECT_DOUBLE_EQ(d.env.dynamics.step_xz, 0.002);
}

TEST(Config, OverrideChangesDigest) {
  const RunConfig base = parse_config("");
  const RunConfig phi = parse_config("", {"repr.phi=0.08"});
  EXPECT_NE(base.digest, phi.digest);
  EXPECT_EQ(phi.env.repr.phi, 0.08);
  // Overrides apply after the file.
  const RunConfig both = parse_config("[repr]\nphi = 0.03\n", {"repr.phi=0.08"});
  EXPECT_EQ(both.digest, phi.digest);
}

TEST(Config, DigestIgnoresOrderingAndFormatting) {
  const RunConfig a = parse_config("[repr]\nphi = 0.08\nmode = diff\n[train]\nlr = 1e-4\n");
  const RunConfig b = parse_config("[train]\nlr=0.0001\n\n; comment\n[repr]\nmode=diff\nphi=0.080\n");
  EXPECT_EQ(a.digest, b.digest);
  // Restating a default is the same configuration.
  EXPECT_EQ(parse_config("[task]\nhorizon = 100\n").digest, parse_config("").digest);
}

TEST(Config, SerializeRoundTrips) {
  const RunConfig a = parse_config("", {"task.target_deg_range=100,140", "repr.mode=rgb", "eval.seeds=4,5"});
  const RunConfig b = parse_config(a.serialize());
  EXPECT_EQ(a.digest, b.digest);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(b.env.ranges.target_rel_angle.lo, a.env.ranges.target_rel_angle.lo);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_config("[task]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[nosuch]\nphi = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("", {"repr.bogus=1"}), ConfigError);
  EXPECT_THROW(parse_config("", {"repr.phi"}), ConfigError);
  // SI spellings are not accepted where a unit suffix is required.
  EXPECT_THROW(parse_config("[task]\ntable_height = 0,0.2\n"), ConfigError);
}

TEST(Config, MalformedValuesRejected) {
  EXPECT_THROW(parse_config("", {"repr.phi=abc"}), ConfigError);
  EXPECT_THROW(parse_config("", {"repr.phi=0.05x"}), ConfigError);
  EXPECT_THROW(parse_config("", {"train.n_envs=2.5"}), ConfigError);
  EXPECT_THROW(parse_config("", {"task.target_deg_range=150,90"}), ConfigError);
  EXPECT_THROW(parse_config("", {"task.target_deg_range=90"}), ConfigError);
  EXPECT_THROW(parse_config("", {"repr.mode=grey"}), ConfigError);
  EXPECT_THROW(parse_config("", {"task.families=rod,spoon"}), ConfigError);
  EXPECT_THROW(parse_config("", {"repr.augment=maybe"}), ConfigError);
  EXPECT_THROW(parse_config("", {"repr.phi=1.5"}), ConfigError);
  EXPECT_THROW(parse_config("", {"train.minibatch=100"}), ConfigError);
  EXPECT_THROW(parse_config("", {"dynamics.d_grip_mm=2"}), ConfigError);
  EXPECT_THROW(parse_config("[task]\n[task]\nhorizon=3\nhorizon=4\n"), ConfigError);
}

TEST(Config, TaskRangeNeedsExplicitOptIn) {
  EXPECT_THROW(parse_config("", {"task.table_height_cm=0,25"}), ConfigError);
  try {
    parse_config("[task]\ntable_height_cm = 0,25\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("--allow-out-of-range"), std::string::npos);
  }
  const RunConfig c = parse_config("", {"task.table_height_cm=0,25"}, true);
  EXPECT_DOUBLE_EQ(c.env.ranges.table_height.hi, 0.25);
  EXPECT_THROW(parse_config("", {"task.init_deg_range=160,195"}), ConfigError);
  // Narrowing inside the supported range is fine.
  EXPECT_NO_THROW(parse_config("", {"task.init_deg_range=170,190"}));
}

TEST(Config, FamiliesAndModes) {
  const RunConfig c = parse_config("", {"task.families=rod", "task.obs=oracle", "task.tip_target=fixed"});
  EXPECT_EQ(c.env.families, std::vector<Family>{Family::kRod});
  EXPECT_EQ(c.env.obs, ObsMode::kOracleAngle);
  EXPECT_EQ(c.env.reward.tip_target, TipTarget::kFixed);
}

TEST(Config, KeyTableCoversSerialization) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(config_keys().size(), c.values.size());
  for (const auto& k : config_keys()) {
    EXPECT_TRUE(c.values.count(k.name)) << k.name;
    EXPECT_FALSE(k.help.empty()) << k.name;
  }
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(load_config(std::filesystem::path("/nonexistent/pivot.ini")), ConfigError);
  EXPECT_EQ(load_config(std::nullopt).digest, parse_config("").digest);
}

}  // namespace
}  // namespace pivot
