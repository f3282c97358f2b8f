// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>

#include "pivot/simd/gemm.h"

namespace pivot::simd {
namespace {

struct F32 {
  using T = float;
  using V = __m256;
  using M = __m256i;
  static constexpr int kLanes = 8;
  static M mask(int count) {
    alignas(32) static const int kTable[16] = {-1, -1, -1, -1, -1, -1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kTable + 8 - count));
  }
  static V zero() { return _mm256_setzero_ps(); }
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static V load(const T* p, M m) { return _mm256_maskload_ps(p, m); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static void store(T* p, V v, M m) { _mm256_maskstore_ps(p, m, v); }
  static V broadcast(const T* p) { return _mm256_broadcast_ss(p); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
};

struct F64 {
  using T = double;
  using V = __m256d;
  using M = __m256i;
  static constexpr int kLanes = 4;
  static M mask(int count) {
    alignas(32) static const long long kTable[8] = {-1, -1, -1, -1, 0, 0, 0, 0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kTable + 4 - count));
  }
  static V zero() { return _mm256_setzero_pd(); }
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static V load(const T* p, M m) { return _mm256_maskload_pd(p, m); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static void store(T* p, V v, M m) { _mm256_maskstore_pd(p, m, v); }
  static V broadcast(const T* p) { return _mm256_broadcast_sd(p); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
};

constexpr int kRows = 6;

// R rows x (2 * lanes) columns. `Full` skips masking when all columns exist.
template <typename S, int R, bool Full>
void micro_kernel(int k, const typename S::T* a, int lda, const typename S::T* b, int ldb,
                  typename S::T* c, int ldc, int cols, bool accumulate) {
  using V = typename S::V;
  constexpr int L = S::kLanes;
  const auto m0 = S::mask(std::min(cols, L));
  const auto m1 = S::mask(std::clamp(cols - L, 0, L));
  V acc[R][2];
  for (int r = 0; r < R; ++r) {
    if (accumulate) {
      acc[r][0] = Full ? S::load(c + r * ldc) : S::load(c + r * ldc, m0);
      acc[r][1] = Full ? S::load(c + r * ldc + L) : S::load(c + r * ldc + L, m1);
    } else {
      acc[r][0] = S::zero();
      acc[r][1] = S::zero();
    }
  }
  for (int p = 0; p < k; ++p) {
    const auto* brow = b + static_cast<long>(p) * ldb;
    const V b0 = Full ? S::load(brow) : S::load(brow, m0);
    const V b1 = Full ? S::load(brow + L) : S::load(brow + L, m1);
    for (int r = 0; r < R; ++r) {
      const V av = S::broadcast(a + static_cast<long>(r) * lda + p);
      acc[r][0] = S::fma(av, b0, acc[r][0]);
      acc[r][1] = S::fma(av, b1, acc[r][1]);
    }
  }
  for (int r = 0; r < R; ++r) {
    if (Full) {
      S::store(c + r * ldc, acc[r][0]);
      S::store(c + r * ldc + L, acc[r][1]);
    } else {
      S::store(c + r * ldc, acc[r][0], m0);
      S::store(c + r * ldc + L, acc[r][1], m1);
    }
  }
}

template <typename S, int R>
void row_block(int k, const typename S::T* a, int lda, const typename S::T* b, int ldb,
               typename S::T* c, int ldc, int cols, bool accumulate) {
  if (cols == 2 * S::kLanes) {
    micro_kernel<S, R, true>(k, a, lda, b, ldb, c, ldc, cols, accumulate);
  } else {
    micro_kernel<S, R, false>(k, a, lda, b, ldb, c, ldc, cols, accumulate);
  }
}

template <typename S>
void gemm_impl(int m, int n, int k, const typename S::T* a, int lda, const typename S::T* b,
               int ldb, typename S::T* c, int ldc, bool accumulate) {
  constexpr int kCols = 2 * S::kLanes;
  for (int j0 = 0; j0 < n; j0 += kCols) {
    const int cols = std::min(kCols, n - j0);
    int i0 = 0;
    for (; i0 + kRows <= m; i0 += kRows) {
      row_block<S, kRows>(k, a + static_cast<long>(i0) * lda, lda, b + j0, ldb,
                          c + static_cast<long>(i0) * ldc + j0, ldc, cols, accumulate);
    }
    const auto* ar = a + static_cast<long>(i0) * lda;
    auto* cr = c + static_cast<long>(i0) * ldc + j0;
    switch (m - i0) {
      case 5: row_block<S, 5>(k, ar, lda, b + j0, ldb, cr, ldc, cols, accumulate); break;
      case 4: row_block<S, 4>(k, ar, lda, b + j0, ldb, cr, ldc, cols, accumulate); break;
      case 3: row_block<S, 3>(k, ar, lda, b + j0, ldb, cr, ldc, cols, accumulate); break;
      case 2: row_block<S, 2>(k, ar, lda, b + j0, ldb, cr, ldc, cols, accumulate); break;
      case 1: row_block<S, 1>(k, ar, lda, b + j0, ldb, cr, ldc, cols, accumulate); break;
      default: break;
    }
  }
}

}  // namespace

void gemm_avx2(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
               int ldc, bool accumulate) {
  gemm_impl<F32>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm_avx2(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
               int ldc, bool accumulate) {
  gemm_impl<F64>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

}  // namespace pivot::simd
