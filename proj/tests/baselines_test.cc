#include "pivot/baselines.h"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "pivot/tacrender.h"

namespace pivot {
namespace {

double fold(double a) {
  a = std::fmod(a, kPi);
  return a < 0 ? a + kPi : a;
}

// Distance between two angles modulo pi.
double mod_pi_error(double a, double b) {
  const double d = fold(a - b);
  return std::min(d, kPi - d);
}

Image bar(double angle, double length, double width, double pu = 1.0, double pv = 1.0, double cx = 31.5,
          double cy = 31.5) {
  Image img(1);
  const double ax = std::cos(angle), ay = std::sin(angle);
  for (int r = 0; r < kImageSize; ++r) {
    for (int c = 0; c < kImageSize; ++c) {
      const double x = (c - cx) * pu, y = (cy - r) * pv;
      const double t = x * ax + y * ay;
      const double w = -x * ay + y * ax;
      if (std::abs(t) <= length / 2 && std::abs(w) <= width / 2) img.at(r, c) = 1.0f;
    }
  }
  return img;
}

// Principal eigenvector angle of the on-pixel covariance via Eigen.
double eigen_oracle(const Image& img) {
  std::vector<Eigen::Vector2d> pts;
  for (int r = 0; r < kImageSize; ++r)
    for (int c = 0; c < kImageSize; ++c)
      if (img.at(r, c) > 0) pts.emplace_back(c, -r);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const Eigen::Vector2d v = es.eigenvectors().col(1);
  return fold(std::atan2(v.y(), v.x()));
}

TEST(Pca, AxisAlignedBars) {
  EXPECT_NEAR(*estimate_angle_pca(bar(0.0, 40, 4)), 0.0, 1e-12);
  EXPECT_NEAR(*estimate_angle_pca(bar(kPi / 2, 40, 4)), kPi / 2, 1e-12);
}

TEST(Pca, ThirtyDegreeBarMatchesOracle) {
  const Image img = bar(deg_to_rad(30), 44, 5);
  const double est = *estimate_angle_pca(img);
  EXPECT_NEAR(rad_to_deg(est), 30.0, 1.0);
  EXPECT_NEAR(est, eigen_oracle(img), 1e-9);
}

TEST(Pca, MatchesEigenOracleOnRandomPatches) {
  Rng rng(11);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    Image img = bar(rng.uniform(0, kPi), rng.uniform(10, 60), rng.uniform(2, 20), 1.0, 1.0,
                    rng.uniform(20, 44), rng.uniform(20, 44));
    const int speckles = rng.uniform_int(0, 40);
    for (int s = 0; s < speckles; ++s) img.at(rng.uniform_int(0, 63), rng.uniform_int(0, 63)) = 1.0f;
    const auto est = estimate_angle_pca(img);
    if (!est) continue;
    ++checked;
    EXPECT_LT(mod_pi_error(*est, eigen_oracle(img)), 1e-9) << "patch " << i;
  }
  EXPECT_GT(checked, 950);
}

TEST(Pca, CleanBarsWithinTwoDegrees) {
  for (int i = 0; i < 50; ++i) {
    const double angle = kPi * i / 50.0;
    const auto est = estimate_angle_pca(bar(angle, 50, 6));
    ASSERT_TRUE(est);
    EXPECT_LE(rad_to_deg(mod_pi_error(*est, angle)), 2.0) << "angle " << rad_to_deg(angle);
  }
}

TEST(Pca, QuarterTurnAndFlipEquivariance) {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Image img = bar(rng.uniform(0, kPi), 40, rng.uniform(3, 12));
    Image rot(1), flip(1);
    for (int r = 0; r < kImageSize; ++r) {
      for (int c = 0; c < kImageSize; ++c) {
        // Counterclockwise quarter turn about the image centre.
        rot.at(kImageSize - 1 - c, r) = img.at(r, c);
        flip.at(r, kImageSize - 1 - c) = img.at(r, c);
      }
    }
    const double a = *estimate_angle_pca(img);
    EXPECT_LT(mod_pi_error(*estimate_angle_pca(rot), a + kPi / 2), 1e-6);
    EXPECT_LT(mod_pi_error(*estimate_angle_pca(flip), kPi - a), 1e-6);
  }
}

TEST(Pca, IntensityScaleInvariant) {
  Image img = bar(0.7, 40, 6);
  const double a = *estimate_angle_pca(img);
  for (float& v : img.data) v *= 0.37f;
  EXPECT_EQ(*estimate_angle_pca(img), a);
}

TEST(Pca, TooFewPixelsIsNoContact) {
  Image img(1);
  for (int c = 0; c < 19; ++c) img.at(10, c) = 1.0f;
  EXPECT_FALSE(estimate_angle_pca(img));
  img.at(10, 19) = 1.0f;
  ASSERT_TRUE(estimate_angle_pca(img));
  EXPECT_EQ(*estimate_angle_pca(img), 0.0);
  EXPECT_FALSE(estimate_angle_pca(Image(1)));
}

TEST(Pca, CollinearPixelsGiveExactLine) {
  Image img(1);
  for (int i = 0; i < 40; ++i) img.at(50 - i, 5 + i) = 1.0f;
  EXPECT_NEAR(*estimate_angle_pca(img), kPi / 4, 1e-12);
}

TEST(Pca, AnisotropicPitchRecoversPhysicalAngle) {
  RenderConfig rc;
  const double pu = rc.pixel_pitch_u(), pv = rc.pixel_pitch_v();
  for (double deg : {20.0, 60.0, 100.0, 145.0}) {
    const Image img = bar(deg_to_rad(deg), 0.016, 0.002, pu, pv);
    const double est = *estimate_angle_pca(img, pu, pv);
    EXPECT_LE(rad_to_deg(mod_pi_error(est, deg_to_rad(deg))), 2.0) << deg;
  }
}

// Binary imprints of flat faces are edge rings, so window clipping biases
// diagonal rods; axis-aligned rods are near exact.
TEST(Pca, RenderedRodImprintTracksRelativeAngle) {
  EnvConfig cfg = pca_env_config(EnvConfig{});
  cfg.families = {Family::kRod};
  Env env(cfg, 5);
  double total = 0.0;
  int seen = 0;
  for (int i = 0; i < 40; ++i) {
    Rng scene_rng(100 + i);
    SceneSpec spec = sample_scene(scene_rng, cfg.families, cfg.ranges);
    spec.init_rel_angle = deg_to_rad(90.0 + 2.5 * i);
    const Observation obs = env.reset(spec, 0.02);
    const auto est = estimate_rel_angle(obs, cfg.render);
    if (!est) continue;
    ++seen;
    const double err = rad_to_deg(mod_pi_error(*est, env.state().rel_angle));
    total += err;
    if (i == 0 || i == 36) EXPECT_LT(err, 0.5) << "rel " << 90.0 + 2.5 * i;
  }
  EXPECT_GE(seen, 30);
  EXPECT_LT(total / seen, 6.0);
}

TEST(Unwrapper, ResolvesAmbiguityByContinuity) {
  AngleUnwrapper u;
  EXPECT_DOUBLE_EQ(u.value(), kPi);
  EXPECT_NEAR(u.update(deg_to_rad(3.0)), deg_to_rad(183.0), 1e-12);
  EXPECT_NEAR(u.update(deg_to_rad(178.0)), deg_to_rad(178.0), 1e-12);
  EXPECT_NEAR(u.update(std::nullopt), deg_to_rad(178.0), 1e-12);
  EXPECT_NEAR(u.update(deg_to_rad(120.0)), deg_to_rad(120.0), 1e-12);
  AngleUnwrapper v(deg_to_rad(60.0));
  EXPECT_NEAR(v.update(deg_to_rad(5.0)), deg_to_rad(5.0), 1e-12);
}

TEST(Unwrapper, RelativeFromPatchAngle) {
  EXPECT_NEAR(patch_angle_to_rel(kPi / 2), 0.0, 1e-15);
  EXPECT_NEAR(patch_angle_to_rel(deg_to_rad(80.0)), deg_to_rad(10.0), 1e-12);
  EXPECT_NEAR(patch_angle_to_rel(deg_to_rad(120.0)), deg_to_rad(150.0), 1e-12);
}

TEST(PcaPolicy, TrueAngleSubstitutionReproducesOracle) {
  EnvConfig oracle;
  oracle.obs = ObsMode::kOracleAngle;
  oracle.horizon = 30;
  Rng rng(9);
  auto params = std::make_shared<PolicyParams<float>>(init_params<float>(rng, net_shape(oracle)));
  // Larger actor weights so the policy actually moves.
  for (float& w : (*params)[kActorW].data) w *= 100.0f;
  const auto direct = run_episodes(oracle, mean_action_policy(params), 5, 2);
  const auto substituted = run_episodes(pca_env_config(oracle), true_angle_policy(params), 5, 2);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(direct[i].total_reward, substituted[i].total_reward);
    EXPECT_EQ(direct[i].deviation, substituted[i].deviation);
  }
}

TEST(PcaPolicy, RunsAndIsDeterministic) {
  EnvConfig oracle;
  oracle.obs = ObsMode::kOracleAngle;
  oracle.horizon = 20;
  Rng rng(9);
  auto params = std::make_shared<PolicyParams<float>>(init_params<float>(rng, net_shape(oracle)));
  const EnvConfig cfg = pca_env_config(oracle);
  const auto a = run_episodes(cfg, pca_policy(params), 3, 4);
  const auto b = run_episodes(cfg, pca_policy(params), 3, 4, 2);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a[i].total_reward, b[i].total_reward);
}

}  // namespace
}  // namespace pivot
