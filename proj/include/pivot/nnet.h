#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pivot/image.h"
#include "pivot/rng.h"

namespace pivot {

inline constexpr int kActionDim = 3;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Fixed layer sizes of the actor-critic network.
struct Arch {
  static constexpr int kConv1Out = 16, kConv1Kernel = 8, kConv1Stride = 4;
  static constexpr int kConv2Out = 32, kConv2Kernel = 4, kConv2Stride = 2;
  static constexpr int kConv3Out = 32, kConv3Kernel = 3, kConv3Stride = 1;
  static constexpr int kConv1Size = (kImageSize - kConv1Kernel) / kConv1Stride + 1;  // 15
  static constexpr int kConv2Size = (kConv1Size - kConv2Kernel) / kConv2Stride + 1;  // 6
  static constexpr int kConv3Size = (kConv2Size - kConv3Kernel) / kConv3Stride + 1;  // 4
  static constexpr int kFlat = kConv3Size * kConv3Size * kConv3Out;                   // 512
  static constexpr int kEncoder = 128;
  static constexpr int kProprio = 64;
  static constexpr int kTrunk = 256;
};

// channels == 0 builds the image-free variant used by the proprio-only and
// oracle-angle baselines.
struct NetShape {
  int channels = 1;
  int vec_dim = 8;
  bool has_encoder() const { return channels > 0; }
  int trunk_input() const { return (has_encoder() ? 2 * Arch::kEncoder : 0) + Arch::kProprio; }
  friend bool operator==(const NetShape&, const NetShape&) = default;
};

enum ParamId {
  kConv1W, kConv1B, kConv2W, kConv2B, kConv3W, kConv3B, kEncW, kEncB,
  kProprioW, kProprioB, kTrunkW, kTrunkB, kActorW, kActorB, kLogStd, kCriticW, kCriticB,
  kNumParamIds
};

const char* param_name(ParamId id);

template <typename T>
struct Tensor {
  std::string name;
  std::vector<uint64_t> shape;
  std::vector<T> data;

  size_t size() const { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Named parameter tensors of one network. Weight matrices are stored
// input-major ([fan_in x fan_out]); convolution weights flatten the kernel as
// (ky, kx, in_channel) along fan_in.
template <typename T>
struct PolicyParams {
  NetShape shape;
  std::vector<Tensor<T>> tensors;
  std::array<int, kNumParamIds> slot{};

  bool has(ParamId id) const { return slot[id] >= 0; }
  Tensor<T>& operator[](ParamId id) { return tensors[static_cast<size_t>(slot[id])]; }
  const Tensor<T>& operator[](ParamId id) const { return tensors[static_cast<size_t>(slot[id])]; }
  const Tensor<T>* find(const std::string& name) const;
  Tensor<T>* find(const std::string& name);
  size_t total_size() const;

  // Same structure, zero-filled.
  PolicyParams zeros_like() const;
  template <typename U>
  PolicyParams<U> cast() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

template <typename T>
PolicyParams<T> make_params(NetShape shape);

// Orthogonal init: gain sqrt(2) for hidden layers, 0.01 for the action mean,
// 1 for the critic; zero biases and zero log-std.
template <typename T>
PolicyParams<T> init_params(Rng& rng, NetShape shape);

// One mini-batch of observations. `images` holds, per sample, the left then
// the right image (64x64xC each, HWC); `features` holds vec_dim per sample.
template <typename T>
struct Batch {
  int size = 0;
  std::span<const T> images;
  std::span<const T> features;
};

template <typename T>
struct NetOutput {
  int batch = 0;
  std::vector<T> mean;  // batch x 3
  std::array<T, kActionDim> log_std{};
  std::vector<T> value;  // batch
};

// Gradients of a scalar loss with respect to the network outputs.
template <typename T>
struct OutputGrads {
  std::vector<T> mean;  // batch x 3
  std::array<T, kActionDim> log_std{};
  std::vector<T> value;  // batch
};

template <typename T>
class PolicyNet {
 public:
  explicit PolicyNet(NetShape shape) : shape_(shape) {}

  const NetShape& shape() const { return shape_; }

  // Activations are retained for backward().
  const NetOutput<T>& forward(const PolicyParams<T>& params, const Batch<T>& batch);

  // Writes d(loss)/d(param) into `grads` (overwritten). Throws UsageError when
  // no forward pass is retained.
  void backward(const PolicyParams<T>& params, const OutputGrads<T>& out_grads,
                PolicyParams<T>& grads);

  // Re-runs the last forward pass when only parameter `changed` differs from
  // the parameters it saw, recomputing from that layer on.
  const NetOutput<T>& reforward(const PolicyParams<T>& params, ParamId changed);

  // Hash of which ReLU units are active in the last forward pass.
  uint64_t activation_pattern() const;

  // Encoder output (batch x 2 x 128) of the last forward pass.
  std::span<const T> encoder_features() const { return enc_; }

 private:
  void resize(int batch);
  void run_conv(const PolicyParams<T>& params);
  void run_enc(const PolicyParams<T>& params);
  void run_post_encoder(const PolicyParams<T>& params);

  NetShape shape_;
  int batch_ = 0;
  bool has_forward_ = false;
  std::vector<T> features_;
  std::vector<T> images_;
  std::vector<T> col1_, a1_, col2_, a2_, col3_, a3_, enc_;
  std::vector<T> prop_, trunk_in_, hidden_;
  NetOutput<T> out_;
  // Backward scratch.
  std::vector<T> scratch_t_, d_hidden_, d_trunk_in_, d_prop_, d_enc_, d_a3_, d_col3_, d_a2_,
      d_col2_, d_a1_;
};

struct GradCheckReport {
  // Over entries whose stencil stays inside one ReLU activation pattern.
  std::map<std::string, double> max_rel_err;
  std::map<std::string, int> checked;
  // Entries whose stencil flips a ReLU on both sides; no finite difference
  // stays in one linear piece, so they are counted instead of compared. A
  // one-sided flip falls back to the difference on the unflipped side.
  std::map<std::string, int> kinks;
  double tolerance = 1e-4;
  // A tensor with more than this fraction of kink entries fails outright.
  double max_kink_fraction = 0.01;
  bool passed() const;
  std::vector<std::string> failing() const;
};

struct GradCheckOptions {
  int batch = 4;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  // Entries checked per tensor; 0 checks every entry.
  int samples_per_tensor = 0;
  int vec_dim = 8;
  // Test hook: scales the analytic gradient of the named tensor.
  std::optional<std::string> corrupt_tensor;
  double corrupt_scale = 1.01;
};

// Central finite differences against backward() on a freshly initialized
// 64-bit network.
GradCheckReport grad_check(Rng& rng, int channels, const GradCheckOptions& opts = {});

}  // namespace pivot
