#include "pivot/nnet.h"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "pivot/errors.h"

namespace pivot {
namespace {

template <typename T>
std::vector<T> random_vector(Rng& rng, size_t n, double lo, double hi) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return v;
}

TEST(NnetTest, ShapesFollowArchitecture) {
  Rng rng(0);
  auto p = init_params<float>(rng, NetShape{1, 8});
  EXPECT_EQ(p[kConv1W].shape, (std::vector<uint64_t>{64, 16}));
  EXPECT_EQ(p[kConv2W].shape, (std::vector<uint64_t>{256, 32}));
  EXPECT_EQ(p[kConv3W].shape, (std::vector<uint64_t>{288, 32}));
  EXPECT_EQ(p[kEncW].shape, (std::vector<uint64_t>{512, 128}));
  EXPECT_EQ(p[kTrunkW].shape, (std::vector<uint64_t>{320, 256}));
  EXPECT_EQ(p[kLogStd].shape, (std::vector<uint64_t>{3}));

  auto rgb = make_params<float>(NetShape{3, 8});
  EXPECT_EQ(rgb[kConv1W].shape, (std::vector<uint64_t>{192, 16}));

  auto flat = make_params<float>(NetShape{0, 9});
  EXPECT_FALSE(flat.has(kConv1W));
  EXPECT_EQ(flat[kTrunkW].shape, (std::vector<uint64_t>{64, 256}));
  EXPECT_EQ(flat[kProprioW].shape, (std::vector<uint64_t>{9, 64}));
}

TEST(NnetTest, InitDeterministicAndOrthogonal) {
  Rng a(42), b(42);
  auto pa = init_params<double>(a, NetShape{1, 8});
  auto pb = init_params<double>(b, NetShape{1, 8});
  EXPECT_EQ(pa, pb);

  for (ParamId id : {kConv1W, kConv2W, kConv3W, kEncW, kProprioW, kTrunkW, kActorW, kCriticW}) {
    const auto& t = pa[id];
    const int fan_in = static_cast<int>(t.shape[0]);
    const int fan_out = static_cast<int>(t.shape[1]);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_in; ++i)
      for (int o = 0; o < fan_out; ++o) w(o, i) = t.data[static_cast<size_t>(i) * fan_out + o];
    const double gain = id == kActorW ? 0.01 : id == kCriticW ? 1.0 : std::sqrt(2.0);
    w /= gain;
    // Orthonormal rows when fan_out <= fan_in, orthonormal columns otherwise.
    Eigen::MatrixXd gram = fan_out <= fan_in ? Eigen::MatrixXd(w * w.transpose())
                                             : Eigen::MatrixXd(w.transpose() * w);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
    EXPECT_LT((gram - eye).cwiseAbs().maxCoeff(), 1e-5) << param_name(id);
  }
  for (ParamId id : {kConv1B, kEncB, kTrunkB, kActorB, kCriticB, kLogStd})
    for (double v : pa[id].data) EXPECT_EQ(v, 0.0);
}

TEST(NnetTest, ZeroInputZeroBiasGivesZeroOutput) {
  Rng rng(1);
  const NetShape shape{1, 8};
  auto p = init_params<float>(rng, shape);
  std::vector<float> images(2 * kImagePixels * 3, 0.0f), features(3 * 8, 0.0f);
  PolicyNet<float> net(shape);
  const auto& out = net.forward(p, Batch<float>{3, images, features});
  for (float v : out.mean) EXPECT_EQ(v, 0.0f);
  for (float v : out.value) EXPECT_EQ(v, 0.0f);
}

TEST(NnetTest, ActorMeanSmallAtInit) {
  Rng rng(2);
  const NetShape shape{1, 8};
  auto p = init_params<float>(rng, shape);
  auto images = random_vector<float>(rng, 8 * 2 * kImagePixels, 0.0, 1.0);
  auto features = random_vector<float>(rng, 8 * 8, -1.0, 1.0);
  PolicyNet<float> net(shape);
  const auto& out = net.forward(p, Batch<float>{8, images, features});
  for (float v : out.mean) EXPECT_LT(std::abs(v), 0.1f);
}

TEST(NnetTest, SwappingSensorsChangesOutput) {
  Rng rng(3);
  const NetShape shape{1, 8};
  auto p = init_params<float>(rng, shape);
  for (auto& v : p[kActorW].data) v *= 100.0f;
  auto images = random_vector<float>(rng, 2 * kImagePixels, 0.0, 1.0);
  auto features = random_vector<float>(rng, 8, -1.0, 1.0);
  std::vector<float> swapped(images.begin() + kImagePixels, images.end());
  swapped.insert(swapped.end(), images.begin(), images.begin() + kImagePixels);
  PolicyNet<float> net(shape);
  const auto a = net.forward(p, Batch<float>{1, images, features}).mean;
  const auto b = net.forward(p, Batch<float>{1, swapped, features}).mean;
  EXPECT_NE(a, b);
}

TEST(NnetTest, SharedEncoderTiesBothPathways) {
  Rng rng(4);
  const NetShape shape{1, 8};
  auto p = init_params<float>(rng, shape);
  auto one = random_vector<float>(rng, kImagePixels, 0.0, 1.0);
  std::vector<float> images = one;
  images.insert(images.end(), one.begin(), one.end());
  auto features = random_vector<float>(rng, 8, -1.0, 1.0);
  PolicyNet<float> net(shape);
  net.forward(p, Batch<float>{1, images, features});
  auto enc = net.encoder_features();
  for (int j = 0; j < Arch::kEncoder; ++j) EXPECT_EQ(enc[j], enc[Arch::kEncoder + j]);
}

TEST(NnetTest, BatchOfOneMatchesBatchRow) {
  Rng rng(5);
  const NetShape shape{3, 8};
  auto p = init_params<float>(rng, shape);
  for (auto& v : p[kActorW].data) v *= 100.0f;
  const size_t per = 2 * kImagePixels * 3;
  auto images = random_vector<float>(rng, 8 * per, 0.0, 1.0);
  auto features = random_vector<float>(rng, 8 * 8, -1.0, 1.0);
  PolicyNet<float> net(shape);
  const auto full = net.forward(p, Batch<float>{8, images, features});
  for (int b = 0; b < 8; ++b) {
    std::span<const float> img(images.data() + b * per, per);
    std::span<const float> feat(features.data() + b * 8, 8);
    const auto& one = net.forward(p, Batch<float>{1, img, feat});
    for (int j = 0; j < kActionDim; ++j) EXPECT_NEAR(one.mean[j], full.mean[b * 3 + j], 1e-6);
    EXPECT_NEAR(one.value[0], full.value[b], 1e-6);
  }
}

TEST(NnetTest, BackwardBeforeForwardThrows) {
  const NetShape shape{1, 8};
  auto p = make_params<float>(shape);
  PolicyNet<float> net(shape);
  auto g = p.zeros_like();
  EXPECT_THROW(net.backward(p, OutputGrads<float>{}, g), UsageError);
}

TEST(NnetTest, ForwardRejectsShapeMismatch) {
  const NetShape shape{1, 8};
  auto p = make_params<float>(shape);
  PolicyNet<float> net(shape);
  std::vector<float> images(kImagePixels), features(8);
  EXPECT_THROW(net.forward(p, Batch<float>{1, images, features}), UsageError);
  auto other = make_params<float>(NetShape{3, 8});
  std::vector<float> ok(2 * kImagePixels);
  EXPECT_THROW(net.forward(other, Batch<float>{1, ok, features}), UsageError);
}

TEST(NnetTest, ZeroOutputGradsGiveZeroGradients) {
  Rng rng(6);
  const NetShape shape{1, 8};
  auto p = init_params<double>(rng, shape);
  auto images = random_vector<double>(rng, 2 * 2 * kImagePixels, 0.0, 1.0);
  auto features = random_vector<double>(rng, 2 * 8, -1.0, 1.0);
  PolicyNet<double> net(shape);
  net.forward(p, Batch<double>{2, images, features});
  OutputGrads<double> g;
  g.mean.assign(6, 0.0);
  g.value.assign(2, 0.0);
  auto grads = p.zeros_like();
  net.backward(p, g, grads);
  for (const auto& t : grads.tensors)
    for (double v : t.data) EXPECT_EQ(v, 0.0) << t.name;
}

TEST(NnetTest, CriticGradientLeavesActorHeadUntouched) {
  Rng rng(7);
  const NetShape shape{1, 8};
  auto p = init_params<double>(rng, shape);
  auto images = random_vector<double>(rng, 2 * 2 * kImagePixels, 0.0, 1.0);
  auto features = random_vector<double>(rng, 2 * 8, -1.0, 1.0);
  PolicyNet<double> net(shape);
  net.forward(p, Batch<double>{2, images, features});
  OutputGrads<double> g;
  g.mean.assign(6, 0.0);
  g.value = {1.0, -0.5};
  auto grads = p.zeros_like();
  net.backward(p, g, grads);
  for (double v : grads[kActorW].data) EXPECT_EQ(v, 0.0);
  for (double v : grads[kActorB].data) EXPECT_EQ(v, 0.0);
  double critic_mass = 0.0;
  for (double v : grads[kCriticW].data) critic_mass += std::abs(v);
  EXPECT_GT(critic_mass, 0.0);
}

TEST(NnetTest, FiniteOutputsForLargeParams) {
  Rng rng(8);
  const NetShape shape{1, 8};
  auto p = init_params<float>(rng, shape);
  for (auto& t : p.tensors)
    for (auto& v : t.data) v *= 10.0f;
  auto images = random_vector<float>(rng, 4 * 2 * kImagePixels, 0.0, 1.0);
  auto features = random_vector<float>(rng, 4 * 8, -1.0, 1.0);
  PolicyNet<float> net(shape);
  const auto& out = net.forward(p, Batch<float>{4, images, features});
  for (float v : out.mean) EXPECT_TRUE(std::isfinite(v));
  for (float v : out.value) EXPECT_TRUE(std::isfinite(v));
}

TEST(NnetTest, LogStdClampedAndGradMasked) {
  Rng rng(9);
  const NetShape shape{0, 9};
  auto p = init_params<double>(rng, shape);
  p[kLogStd].data = {-7.0, 0.3, 4.0};
  std::vector<double> images, features(9, 0.1);
  PolicyNet<double> net(shape);
  const auto& out = net.forward(p, Batch<double>{1, images, features});
  EXPECT_EQ(out.log_std[0], kLogStdMin);
  EXPECT_EQ(out.log_std[1], 0.3);
  EXPECT_EQ(out.log_std[2], kLogStdMax);
  OutputGrads<double> g;
  g.mean.assign(3, 0.0);
  g.value.assign(1, 0.0);
  g.log_std = {1.0, 1.0, 1.0};
  auto grads = p.zeros_like();
  net.backward(p, g, grads);
  EXPECT_EQ(grads[kLogStd].data, (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(NnetTest, CastRoundTrip) {
  Rng rng(10);
  auto p = init_params<float>(rng, NetShape{1, 8});
  EXPECT_EQ(p.cast<double>().cast<float>(), p);
}

class GradCheckTest : public ::testing::TestWithParam<int> {};

TEST_P(GradCheckTest, BinaryChannelAllTensorsPass) {
  Rng rng(static_cast<uint64_t>(GetParam()));
  GradCheckOptions opts;
  opts.samples_per_tensor = 256;
  const auto report = grad_check(rng, 1, opts);
  for (const auto& [name, err] : report.max_rel_err) EXPECT_LT(err, 1e-4) << name;
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.max_rel_err.size(), 17u);
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradCheckTest, ::testing::Values(0, 1, 2));

TEST(GradCheck, RgbAndImageFreeVariants) {
  Rng rng(21);
  GradCheckOptions opts;
  opts.samples_per_tensor = 128;
  EXPECT_TRUE(grad_check(rng, 3, opts).passed());
  opts.vec_dim = 9;
  const auto flat = grad_check(rng, 0, opts);
  EXPECT_TRUE(flat.passed());
  EXPECT_EQ(flat.max_rel_err.count("conv1.weight"), 0u);
}

TEST(GradCheck, CorruptedTensorIsFlagged) {
  Rng rng(22);
  GradCheckOptions opts;
  opts.samples_per_tensor = 64;
  opts.corrupt_tensor = "conv2.weight";
  const auto report = grad_check(rng, 1, opts);
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.failing(), std::vector<std::string>{"conv2.weight"});
}

TEST(GradCheck, KinkStencilsAreCountedNotCompared) {
  // A wide stencil crosses many ReLU kinks. Away from them the loss is linear
  // in each conv weight, so the remaining entries still agree exactly.
  Rng rng(23);
  GradCheckOptions opts;
  opts.samples_per_tensor = 200;
  opts.epsilon = 3e-2;
  GradCheckReport report = grad_check(rng, 1, opts);
  EXPECT_GT(report.kinks.at("conv1.weight"), 0);
  EXPECT_LT(report.max_rel_err.at("conv1.weight"), 1e-4);
  report.max_kink_fraction = 0.0;
  EXPECT_FALSE(report.passed());
}

TEST(GradCheck, OneSidedFallbackResolvesNearZeroUnit) {
  // This draw has a pre-activation within epsilon of zero; central stencils
  // straddle it for many conv entries.
  Rng rng(1);
  GradCheckOptions opts;
  opts.samples_per_tensor = 256;
  const auto report = grad_check(rng, 3, opts);
  for (const auto& [name, n] : report.kinks) EXPECT_EQ(n, 0) << name;
  EXPECT_TRUE(report.passed());
}

}  // namespace
}  // namespace pivot
