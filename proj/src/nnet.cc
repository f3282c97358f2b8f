#include "pivot/nnet.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "pivot/errors.h"
#include "pivot/simd/gemm.h"

namespace pivot {
namespace {

struct ParamDef {
  ParamId id;
  const char* name;
};

constexpr ParamDef kParamDefs[kNumParamIds] = {
    {kConv1W, "conv1.weight"},     {kConv1B, "conv1.bias"},     {kConv2W, "conv2.weight"},
    {kConv2B, "conv2.bias"},       {kConv3W, "conv3.weight"},   {kConv3B, "conv3.bias"},
    {kEncW, "enc_fc.weight"},      {kEncB, "enc_fc.bias"},      {kProprioW, "proprio_fc.weight"},
    {kProprioB, "proprio_fc.bias"}, {kTrunkW, "trunk_fc.weight"}, {kTrunkB, "trunk_fc.bias"},
    {kActorW, "actor_mean.weight"}, {kActorB, "actor_mean.bias"}, {kLogStd, "actor_logstd"},
    {kCriticW, "critic.weight"},   {kCriticB, "critic.bias"},
};

bool is_encoder_param(ParamId id) { return id <= kEncB; }

// fan_in x fan_out for every weight tensor.
std::pair<int, int> weight_dims(ParamId id, const NetShape& s) {
  switch (id) {
    case kConv1W: return {Arch::kConv1Kernel * Arch::kConv1Kernel * s.channels, Arch::kConv1Out};
    case kConv2W: return {Arch::kConv2Kernel * Arch::kConv2Kernel * Arch::kConv1Out, Arch::kConv2Out};
    case kConv3W: return {Arch::kConv3Kernel * Arch::kConv3Kernel * Arch::kConv2Out, Arch::kConv3Out};
    case kEncW: return {Arch::kFlat, Arch::kEncoder};
    case kProprioW: return {s.vec_dim, Arch::kProprio};
    case kTrunkW: return {s.trunk_input(), Arch::kTrunk};
    case kActorW: return {Arch::kTrunk, kActionDim};
    case kCriticW: return {Arch::kTrunk, 1};
    default: return {0, 0};
  }
}

int bias_dim(ParamId id) {
  switch (id) {
    case kConv1B: return Arch::kConv1Out;
    case kConv2B: return Arch::kConv2Out;
    case kConv3B: return Arch::kConv3Out;
    case kEncB: return Arch::kEncoder;
    case kProprioB: return Arch::kProprio;
    case kTrunkB: return Arch::kTrunk;
    case kActorB: return kActionDim;
    case kLogStd: return kActionDim;
    case kCriticB: return 1;
    default: return 0;
  }
}

bool is_weight(ParamId id) {
  return id == kConv1W || id == kConv2W || id == kConv3W || id == kEncW || id == kProprioW ||
         id == kTrunkW || id == kActorW || id == kCriticW;
}

double init_gain(ParamId id) {
  if (id == kActorW) return 0.01;
  if (id == kCriticW) return 1.0;
  return std::sqrt(2.0);
}

// Y[rows x n] = X[rows x k] W[k x n] + b.
template <typename T>
void linear(int rows, int k, int n, const T* x, const T* w, const T* b, T* y) {
  for (int r = 0; r < rows; ++r) std::memcpy(y + static_cast<long>(r) * n, b, sizeof(T) * n);
  simd::gemm(rows, n, k, x, k, w, n, y, n, /*accumulate=*/true);
}

template <typename T>
void relu(std::vector<T>& v, size_t count) {
  for (size_t i = 0; i < count; ++i) v[i] = v[i] > T(0) ? v[i] : T(0);
}

// Patches of an NHWC batch; rows ordered (image, oy, ox), columns (ky, kx, c).
template <typename T>
void im2col(const T* x, int n, int size, int ch, int kernel, int stride, int out_size, T* col) {
  const int row_len = kernel * kernel * ch;
  const size_t run = static_cast<size_t>(kernel) * ch;
  for (int img = 0; img < n; ++img) {
    const T* xi = x + static_cast<long>(img) * size * size * ch;
    for (int oy = 0; oy < out_size; ++oy) {
      for (int ox = 0; ox < out_size; ++ox) {
        T* dst = col + (static_cast<long>(img) * out_size * out_size + oy * out_size + ox) * row_len;
        for (int ky = 0; ky < kernel; ++ky) {
          const T* src = xi + (static_cast<long>(oy * stride + ky) * size + ox * stride) * ch;
          std::memcpy(dst + ky * run, src, sizeof(T) * run);
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int n, int size, int ch, int kernel, int stride, int out_size, T* x) {
  std::fill(x, x + static_cast<long>(n) * size * size * ch, T(0));
  const int row_len = kernel * kernel * ch;
  const int run = kernel * ch;
  for (int img = 0; img < n; ++img) {
    T* xi = x + static_cast<long>(img) * size * size * ch;
    for (int oy = 0; oy < out_size; ++oy) {
      for (int ox = 0; ox < out_size; ++ox) {
        const T* src = col + (static_cast<long>(img) * out_size * out_size + oy * out_size + ox) * row_len;
        for (int ky = 0; ky < kernel; ++ky) {
          T* dst = xi + (static_cast<long>(oy * stride + ky) * size + ox * stride) * ch;
          for (int i = 0; i < run; ++i) dst[i] += src[ky * run + i];
        }
      }
    }
  }
}

// dW[k x n] = X^T dY, db = column sums of dY.
template <typename T>
void linear_param_grads(int rows, int k, int n, const T* x, const T* dy, std::vector<T>& scratch,
                        T* dw, T* db) {
  scratch.resize(static_cast<size_t>(rows) * k);
  simd::transpose(rows, k, x, scratch.data());
  simd::gemm(k, n, rows, scratch.data(), rows, dy, n, dw, n, /*accumulate=*/false);
  if (db != nullptr) {
    std::fill(db, db + n, T(0));
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < n; ++j) db[j] += dy[static_cast<long>(r) * n + j];
  }
}

// dX[rows x k] = dY W^T.
template <typename T>
void linear_input_grad(int rows, int k, int n, const T* dy, const T* w, std::vector<T>& scratch,
                       T* dx) {
  scratch.resize(static_cast<size_t>(k) * n);
  simd::transpose(k, n, w, scratch.data());
  simd::gemm(rows, k, n, dy, n, scratch.data(), k, dx, k, /*accumulate=*/false);
}

template <typename T>
void mask_relu(T* d, const T* activation, size_t count) {
  for (size_t i = 0; i < count; ++i) d[i] = activation[i] > T(0) ? d[i] : T(0);
}

}  // namespace

const char* param_name(ParamId id) { return kParamDefs[id].name; }

template <typename T>
const Tensor<T>* PolicyParams<T>::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

template <typename T>
Tensor<T>* PolicyParams<T>::find(const std::string& name) {
  for (auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

template <typename T>
size_t PolicyParams<T>::total_size() const {
  size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

template <typename T>
PolicyParams<T> PolicyParams<T>::zeros_like() const {
  PolicyParams out = *this;
  for (auto& t : out.tensors) std::fill(t.data.begin(), t.data.end(), T(0));
  return out;
}

template <typename T>
template <typename U>
PolicyParams<U> PolicyParams<T>::cast() const {
  PolicyParams<U> out;
  out.shape = shape;
  out.slot = slot;
  for (const auto& t : tensors) {
    Tensor<U> u;
    u.name = t.name;
    u.shape = t.shape;
    u.data.assign(t.data.begin(), t.data.end());
    out.tensors.push_back(std::move(u));
  }
  return out;
}

template <typename T>
PolicyParams<T> make_params(NetShape shape) {
  PolicyParams<T> p;
  p.shape = shape;
  p.slot.fill(-1);
  for (const auto& def : kParamDefs) {
    if (is_encoder_param(def.id) && !shape.has_encoder()) continue;
    Tensor<T> t;
    t.name = def.name;
    if (is_weight(def.id)) {
      const auto [fan_in, fan_out] = weight_dims(def.id, shape);
      t.shape = {static_cast<uint64_t>(fan_in), static_cast<uint64_t>(fan_out)};
      t.data.assign(static_cast<size_t>(fan_in) * fan_out, T(0));
    } else {
      t.shape = {static_cast<uint64_t>(bias_dim(def.id))};
      t.data.assign(static_cast<size_t>(bias_dim(def.id)), T(0));
    }
    p.slot[def.id] = static_cast<int>(p.tensors.size());
    p.tensors.push_back(std::move(t));
  }
  return p;
}

template <typename T>
PolicyParams<T> init_params(Rng& rng, NetShape shape) {
  PolicyParams<T> p = make_params<T>(shape);
  for (const auto& def : kParamDefs) {
    if (!p.has(def.id) || !is_weight(def.id)) continue;
    const auto [fan_in, fan_out] = weight_dims(def.id, shape);
    // Orthogonalize the [fan_out x fan_in] matrix like torch.nn.init.orthogonal_.
    const int rows = fan_out;
    const int cols = fan_in;
    const bool wide = rows < cols;
    const int qr_rows = wide ? cols : rows;
    const int qr_cols = wide ? rows : cols;
    Eigen::MatrixXd flat(qr_rows, qr_cols);
    for (int i = 0; i < qr_rows; ++i)
      for (int j = 0; j < qr_cols; ++j) flat(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(flat);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(qr_rows, qr_cols);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(qr_cols).template triangularView<Eigen::Upper>();
    for (int j = 0; j < qr_cols; ++j) {
      if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    const Eigen::MatrixXd w = wide ? Eigen::MatrixXd(q.transpose()) : q;  // rows x cols
    const double gain = init_gain(def.id);
    auto& t = p[def.id];
    for (int o = 0; o < rows; ++o)
      for (int i = 0; i < cols; ++i)
        t.data[static_cast<size_t>(i) * fan_out + o] = static_cast<T>(gain * w(o, i));
  }
  return p;
}

template <typename T>
void PolicyNet<T>::resize(int batch) {
  batch_ = batch;
  const size_t n = static_cast<size_t>(2 * batch);
  const int c = shape_.channels;
  if (shape_.has_encoder()) {
    constexpr int s1 = Arch::kConv1Size, s2 = Arch::kConv2Size, s3 = Arch::kConv3Size;
    col1_.resize(n * s1 * s1 * Arch::kConv1Kernel * Arch::kConv1Kernel * c);
    a1_.resize(n * s1 * s1 * Arch::kConv1Out);
    col2_.resize(n * s2 * s2 * Arch::kConv2Kernel * Arch::kConv2Kernel * Arch::kConv1Out);
    a2_.resize(n * s2 * s2 * Arch::kConv2Out);
    col3_.resize(n * s3 * s3 * Arch::kConv3Kernel * Arch::kConv3Kernel * Arch::kConv2Out);
    a3_.resize(n * Arch::kFlat);
    enc_.resize(n * Arch::kEncoder);
  }
  prop_.resize(static_cast<size_t>(batch) * Arch::kProprio);
  trunk_in_.resize(static_cast<size_t>(batch) * shape_.trunk_input());
  hidden_.resize(static_cast<size_t>(batch) * Arch::kTrunk);
  out_.batch = batch;
  out_.mean.resize(static_cast<size_t>(batch) * kActionDim);
  out_.value.resize(static_cast<size_t>(batch));
}

template <typename T>
void PolicyNet<T>::run_conv(const PolicyParams<T>& params) {
  const int N = 2 * batch_;
  const int C = shape_.channels;
  constexpr int s1 = Arch::kConv1Size, s2 = Arch::kConv2Size, s3 = Arch::kConv3Size;
  const int k1 = Arch::kConv1Kernel * Arch::kConv1Kernel * C;
  im2col(images_.data(), N, kImageSize, C, Arch::kConv1Kernel, Arch::kConv1Stride, s1, col1_.data());
  linear(N * s1 * s1, k1, Arch::kConv1Out, col1_.data(), params[kConv1W].data.data(),
         params[kConv1B].data.data(), a1_.data());
  relu(a1_, a1_.size());

  const int k2 = Arch::kConv2Kernel * Arch::kConv2Kernel * Arch::kConv1Out;
  im2col(a1_.data(), N, s1, Arch::kConv1Out, Arch::kConv2Kernel, Arch::kConv2Stride, s2, col2_.data());
  linear(N * s2 * s2, k2, Arch::kConv2Out, col2_.data(), params[kConv2W].data.data(),
         params[kConv2B].data.data(), a2_.data());
  relu(a2_, a2_.size());

  const int k3 = Arch::kConv3Kernel * Arch::kConv3Kernel * Arch::kConv2Out;
  im2col(a2_.data(), N, s2, Arch::kConv2Out, Arch::kConv3Kernel, Arch::kConv3Stride, s3, col3_.data());
  linear(N * s3 * s3, k3, Arch::kConv3Out, col3_.data(), params[kConv3W].data.data(),
         params[kConv3B].data.data(), a3_.data());
  relu(a3_, a3_.size());
}

template <typename T>
void PolicyNet<T>::run_enc(const PolicyParams<T>& params) {
  linear(2 * batch_, Arch::kFlat, Arch::kEncoder, a3_.data(), params[kEncW].data.data(),
         params[kEncB].data.data(), enc_.data());
  relu(enc_, enc_.size());
}

template <typename T>
void PolicyNet<T>::run_post_encoder(const PolicyParams<T>& params) {
  const int B = batch_;
  const int trunk_in = shape_.trunk_input();
  linear(B, shape_.vec_dim, Arch::kProprio, features_.data(), params[kProprioW].data.data(),
         params[kProprioB].data.data(), prop_.data());
  for (auto& v : prop_) v = std::tanh(v);

  const int enc_width = trunk_in - Arch::kProprio;
  for (int b = 0; b < B; ++b) {
    T* dst = trunk_in_.data() + static_cast<long>(b) * trunk_in;
    if (enc_width > 0) std::memcpy(dst, enc_.data() + static_cast<long>(b) * enc_width, sizeof(T) * enc_width);
    std::memcpy(dst + enc_width, prop_.data() + static_cast<long>(b) * Arch::kProprio, sizeof(T) * Arch::kProprio);
  }
  linear(B, trunk_in, Arch::kTrunk, trunk_in_.data(), params[kTrunkW].data.data(),
         params[kTrunkB].data.data(), hidden_.data());
  relu(hidden_, hidden_.size());

  linear(B, Arch::kTrunk, kActionDim, hidden_.data(), params[kActorW].data.data(),
         params[kActorB].data.data(), out_.mean.data());
  linear(B, Arch::kTrunk, 1, hidden_.data(), params[kCriticW].data.data(),
         params[kCriticB].data.data(), out_.value.data());
  for (int j = 0; j < kActionDim; ++j) {
    out_.log_std[j] = std::clamp(params[kLogStd].data[j], T(kLogStdMin), T(kLogStdMax));
  }
}

template <typename T>
const NetOutput<T>& PolicyNet<T>::forward(const PolicyParams<T>& params, const Batch<T>& batch) {
  if (!(params.shape == shape_)) throw UsageError("forward: parameter shape mismatch");
  const int B = batch.size;
  const int C = shape_.channels;
  if (batch.features.size() != static_cast<size_t>(B) * shape_.vec_dim)
    throw UsageError("forward: feature batch has the wrong size");
  if (shape_.has_encoder() &&
      batch.images.size() != static_cast<size_t>(B) * 2 * kImagePixels * C)
    throw UsageError("forward: image batch has the wrong size");
  resize(B);
  features_.assign(batch.features.begin(), batch.features.end());
  if (shape_.has_encoder()) {
    images_.assign(batch.images.begin(), batch.images.end());
    run_conv(params);
    run_enc(params);
  }
  run_post_encoder(params);
  has_forward_ = true;
  return out_;
}

template <typename T>
const NetOutput<T>& PolicyNet<T>::reforward(const PolicyParams<T>& params, ParamId changed) {
  if (!has_forward_) throw UsageError("reforward: no retained forward pass");
  if (!(params.shape == shape_)) throw UsageError("reforward: parameter shape mismatch");
  if (shape_.has_encoder()) {
    if (changed < kEncW) run_conv(params);
    if (changed <= kEncB) run_enc(params);
  }
  run_post_encoder(params);
  return out_;
}

template <typename T>
void PolicyNet<T>::backward(const PolicyParams<T>& params, const OutputGrads<T>& g,
                            PolicyParams<T>& grads) {
  if (!has_forward_) throw UsageError("backward: no retained forward pass");
  if (!(params.shape == shape_)) throw UsageError("backward: parameter shape mismatch");
  const int B = batch_;
  const int N = 2 * B;
  const int C = shape_.channels;
  const int trunk_in = shape_.trunk_input();
  if (g.mean.size() != static_cast<size_t>(B) * kActionDim || g.value.size() != static_cast<size_t>(B))
    throw UsageError("backward: output gradient batch mismatch");
  if (grads.tensors.size() != params.tensors.size() || !(grads.shape == shape_)) grads = params.zeros_like();

  // Heads.
  linear_param_grads(B, Arch::kTrunk, kActionDim, hidden_.data(), g.mean.data(), scratch_t_,
                     grads[kActorW].data.data(), grads[kActorB].data.data());
  linear_param_grads(B, Arch::kTrunk, 1, hidden_.data(), g.value.data(), scratch_t_,
                     grads[kCriticW].data.data(), grads[kCriticB].data.data());
  for (int j = 0; j < kActionDim; ++j) {
    const T raw = params[kLogStd].data[j];
    const bool inside = raw >= T(kLogStdMin) && raw <= T(kLogStdMax);
    grads[kLogStd].data[j] = inside ? g.log_std[j] : T(0);
  }

  d_hidden_.resize(static_cast<size_t>(B) * Arch::kTrunk);
  linear_input_grad(B, Arch::kTrunk, kActionDim, g.mean.data(), params[kActorW].data.data(),
                    scratch_t_, d_hidden_.data());
  {
    // Add the critic path: dh += dv * Wc^T (Wc is 256 x 1).
    const T* wc = params[kCriticW].data.data();
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < Arch::kTrunk; ++j)
        d_hidden_[static_cast<size_t>(b) * Arch::kTrunk + j] += g.value[b] * wc[j];
  }
  mask_relu(d_hidden_.data(), hidden_.data(), d_hidden_.size());

  // Trunk.
  linear_param_grads(B, trunk_in, Arch::kTrunk, trunk_in_.data(), d_hidden_.data(), scratch_t_,
                     grads[kTrunkW].data.data(), grads[kTrunkB].data.data());
  d_trunk_in_.resize(static_cast<size_t>(B) * trunk_in);
  linear_input_grad(B, trunk_in, Arch::kTrunk, d_hidden_.data(), params[kTrunkW].data.data(),
                    scratch_t_, d_trunk_in_.data());

  // Proprioception branch.
  const int enc_width = trunk_in - Arch::kProprio;
  d_prop_.resize(static_cast<size_t>(B) * Arch::kProprio);
  for (int b = 0; b < B; ++b) {
    for (int j = 0; j < Arch::kProprio; ++j) {
      const T y = prop_[static_cast<size_t>(b) * Arch::kProprio + j];
      d_prop_[static_cast<size_t>(b) * Arch::kProprio + j] =
          d_trunk_in_[static_cast<size_t>(b) * trunk_in + enc_width + j] * (T(1) - y * y);
    }
  }
  linear_param_grads(B, shape_.vec_dim, Arch::kProprio, features_.data(), d_prop_.data(), scratch_t_,
                     grads[kProprioW].data.data(), grads[kProprioB].data.data());

  if (!shape_.has_encoder()) return;

  // Encoder head: rows of d_trunk_in's first 256 columns are two 128-wide rows.
  d_enc_.resize(static_cast<size_t>(N) * Arch::kEncoder);
  for (int b = 0; b < B; ++b) {
    std::memcpy(d_enc_.data() + static_cast<size_t>(b) * enc_width,
                d_trunk_in_.data() + static_cast<size_t>(b) * trunk_in, sizeof(T) * enc_width);
  }
  mask_relu(d_enc_.data(), enc_.data(), d_enc_.size());
  linear_param_grads(N, Arch::kFlat, Arch::kEncoder, a3_.data(), d_enc_.data(), scratch_t_,
                     grads[kEncW].data.data(), grads[kEncB].data.data());
  d_a3_.resize(static_cast<size_t>(N) * Arch::kFlat);
  linear_input_grad(N, Arch::kFlat, Arch::kEncoder, d_enc_.data(), params[kEncW].data.data(),
                    scratch_t_, d_a3_.data());
  mask_relu(d_a3_.data(), a3_.data(), d_a3_.size());

  constexpr int s1 = Arch::kConv1Size, s2 = Arch::kConv2Size, s3 = Arch::kConv3Size;
  // conv3
  const int k3 = Arch::kConv3Kernel * Arch::kConv3Kernel * Arch::kConv2Out;
  linear_param_grads(N * s3 * s3, k3, Arch::kConv3Out, col3_.data(), d_a3_.data(), scratch_t_,
                     grads[kConv3W].data.data(), grads[kConv3B].data.data());
  d_col3_.resize(col3_.size());
  linear_input_grad(N * s3 * s3, k3, Arch::kConv3Out, d_a3_.data(), params[kConv3W].data.data(),
                    scratch_t_, d_col3_.data());
  d_a2_.resize(a2_.size());
  col2im(d_col3_.data(), N, s2, Arch::kConv2Out, Arch::kConv3Kernel, Arch::kConv3Stride, s3, d_a2_.data());
  mask_relu(d_a2_.data(), a2_.data(), d_a2_.size());

  // conv2
  const int k2 = Arch::kConv2Kernel * Arch::kConv2Kernel * Arch::kConv1Out;
  linear_param_grads(N * s2 * s2, k2, Arch::kConv2Out, col2_.data(), d_a2_.data(), scratch_t_,
                     grads[kConv2W].data.data(), grads[kConv2B].data.data());
  d_col2_.resize(col2_.size());
  linear_input_grad(N * s2 * s2, k2, Arch::kConv2Out, d_a2_.data(), params[kConv2W].data.data(),
                    scratch_t_, d_col2_.data());
  d_a1_.resize(a1_.size());
  col2im(d_col2_.data(), N, s1, Arch::kConv1Out, Arch::kConv2Kernel, Arch::kConv2Stride, s2, d_a1_.data());
  mask_relu(d_a1_.data(), a1_.data(), d_a1_.size());

  // conv1
  const int k1 = Arch::kConv1Kernel * Arch::kConv1Kernel * C;
  linear_param_grads(N * s1 * s1, k1, Arch::kConv1Out, col1_.data(), d_a1_.data(), scratch_t_,
                     grads[kConv1W].data.data(), grads[kConv1B].data.data());
}

bool GradCheckReport::passed() const { return failing().empty(); }

std::vector<std::string> GradCheckReport::failing() const {
  std::vector<std::string> out;
  for (const auto& [name, err] : max_rel_err) {
    const auto k = kinks.find(name);
    const int n_kinks = k == kinks.end() ? 0 : k->second;
    if (!(err < tolerance) || n_kinks > max_kink_fraction * checked.at(name)) out.push_back(name);
  }
  return out;
}

template <typename T>
uint64_t PolicyNet<T>::activation_pattern() const {
  uint64_t h = 1469598103934665603ULL;
  for (const auto* v : {&a1_, &a2_, &a3_, &enc_, &hidden_}) {
    for (T x : *v) {
      h ^= x > T(0) ? 1u : 0u;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

GradCheckReport grad_check(Rng& rng, int channels, const GradCheckOptions& opts) {
  const NetShape shape{channels, opts.vec_dim};
  PolicyParams<double> params = init_params<double>(rng, shape);
  // Give the heads non-trivial scale so every path carries signal.
  for (auto& v : params[kActorW].data) v *= 100.0;
  for (auto& v : params[kLogStd].data) v = rng.uniform(-1.0, 0.5);
  for (auto& t : params.tensors) {
    if (t.shape.size() == 1 && t.name != "actor_logstd")
      for (auto& v : t.data) v = rng.uniform(-0.1, 0.1);
  }

  const int B = opts.batch;
  std::vector<double> images(static_cast<size_t>(B) * 2 * kImagePixels * std::max(channels, 0));
  for (auto& v : images) v = rng.uniform01();
  std::vector<double> features(static_cast<size_t>(B) * shape.vec_dim);
  for (auto& v : features) v = rng.uniform(-1.0, 1.0);
  const Batch<double> batch{B, images, features};

  OutputGrads<double> weights;
  weights.mean.resize(static_cast<size_t>(B) * kActionDim);
  weights.value.resize(static_cast<size_t>(B));
  for (auto& v : weights.mean) v = rng.uniform(-1.0, 1.0);
  for (auto& v : weights.value) v = rng.uniform(-1.0, 1.0);
  for (auto& v : weights.log_std) v = rng.uniform(-1.0, 1.0);

  PolicyNet<double> net(shape);
  auto loss = [&](const PolicyParams<double>& p, ParamId changed) {
    const auto& out = net.reforward(p, changed);
    double l = 0.0;
    for (size_t i = 0; i < out.mean.size(); ++i) l += weights.mean[i] * out.mean[i];
    for (size_t i = 0; i < out.value.size(); ++i) l += weights.value[i] * out.value[i];
    for (int j = 0; j < kActionDim; ++j) l += weights.log_std[j] * out.log_std[j];
    return l;
  };

  net.forward(params, batch);
  const uint64_t pattern = net.activation_pattern();
  const double base = loss(params, kConv1W);
  PolicyParams<double> analytic = params.zeros_like();
  net.backward(params, weights, analytic);
  if (opts.corrupt_tensor) {
    if (auto* t = analytic.find(*opts.corrupt_tensor)) {
      for (auto& v : t->data) v *= opts.corrupt_scale;
    }
  }

  GradCheckReport report;
  report.tolerance = opts.tolerance;
  PolicyParams<double> probe = params;
  for (size_t ti = 0; ti < params.tensors.size(); ++ti) {
    const auto& tensor = params.tensors[ti];
    ParamId id = kConv1W;
    for (int k = 0; k < kNumParamIds; ++k)
      if (params.slot[k] == static_cast<int>(ti)) id = static_cast<ParamId>(k);
    std::vector<size_t> indices;
    if (opts.samples_per_tensor <= 0 || static_cast<int>(tensor.size()) <= opts.samples_per_tensor) {
      for (size_t i = 0; i < tensor.size(); ++i) indices.push_back(i);
    } else {
      for (int i = 0; i < opts.samples_per_tensor; ++i)
        indices.push_back(static_cast<size_t>(rng.uniform_int(0, static_cast<int>(tensor.size()) - 1)));
    }
    double worst = 0.0;
    int kinks = 0;
    for (size_t idx : indices) {
      double& slot = probe.tensors[ti].data[idx];
      const double orig = slot;
      slot = orig + opts.epsilon;
      const double up = loss(probe, id);
      const bool up_kink = net.activation_pattern() != pattern;
      slot = orig - opts.epsilon;
      const double down = loss(probe, id);
      const bool down_kink = net.activation_pattern() != pattern;
      slot = orig;
      double numeric;
      if (up_kink && down_kink) {
        ++kinks;
        continue;
      } else if (up_kink) {
        numeric = (base - down) / opts.epsilon;
      } else if (down_kink) {
        numeric = (up - base) / opts.epsilon;
      } else {
        numeric = (up - down) / (2.0 * opts.epsilon);
      }
      const double exact = analytic.tensors[ti].data[idx];
      const double scale = std::max({std::abs(numeric), std::abs(exact), 1e-6});
      worst = std::max(worst, std::abs(numeric - exact) / scale);
    }
    net.reforward(probe, id);  // drop the last perturbed activations
    report.max_rel_err[tensor.name] = worst;
    report.checked[tensor.name] = static_cast<int>(indices.size());
    report.kinks[tensor.name] = kinks;
  }
  return report;
}

template struct PolicyParams<float>;
template struct PolicyParams<double>;
template PolicyParams<double> PolicyParams<float>::cast<double>() const;
template PolicyParams<float> PolicyParams<double>::cast<float>() const;
template PolicyParams<float> PolicyParams<float>::cast<float>() const;
template PolicyParams<double> PolicyParams<double>::cast<double>() const;
template PolicyParams<float> make_params<float>(NetShape);
template PolicyParams<double> make_params<double>(NetShape);
template PolicyParams<float> init_params<float>(Rng&, NetShape);
template PolicyParams<double> init_params<double>(Rng&, NetShape);
template class PolicyNet<float>;
template class PolicyNet<double>;

}  // namespace pivot
