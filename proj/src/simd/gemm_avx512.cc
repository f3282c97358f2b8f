// Compiled with -mavx512f. Only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>

#include "pivot/simd/gemm.h"

namespace pivot::simd {
namespace {

struct F32 {
  using T = float;
  using V = __m512;
  using M = __mmask16;
  static constexpr int kLanes = 16;
  static M mask(int count) { return static_cast<M>((1u << count) - 1u); }
  static V zero() { return _mm512_setzero_ps(); }
  static V load(const T* p) { return _mm512_loadu_ps(p); }
  static V load(const T* p, M m) { return _mm512_maskz_loadu_ps(m, p); }
  static void store(T* p, V v) { _mm512_storeu_ps(p, v); }
  static void store(T* p, V v, M m) { _mm512_mask_storeu_ps(p, m, v); }
  static V broadcast(const T* p) { return _mm512_set1_ps(*p); }
  static V fma(V a, V b, V c) { return _mm512_fmadd_ps(a, b, c); }
};

struct F64 {
  using T = double;
  using V = __m512d;
  using M = __mmask8;
  static constexpr int kLanes = 8;
  static M mask(int count) { return static_cast<M>((1u << count) - 1u); }
  static V zero() { return _mm512_setzero_pd(); }
  static V load(const T* p) { return _mm512_loadu_pd(p); }
  static V load(const T* p, M m) { return _mm512_maskz_loadu_pd(m, p); }
  static void store(T* p, V v) { _mm512_storeu_pd(p, v); }
  static void store(T* p, V v, M m) { _mm512_mask_storeu_pd(p, m, v); }
  static V broadcast(const T* p) { return _mm512_set1_pd(*p); }
  static V fma(V a, V b, V c) { return _mm512_fmadd_pd(a, b, c); }
};

constexpr int kRows = 8;

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

template <typename S, int... Rs>
void tail_rows(int rows, int k, const typename S::T* a, int lda, const typename S::T* b, int ldb,
               typename S::T* c, int ldc, int cols, bool accumulate,
               std::integer_sequence<int, Rs...>) {
  ((rows == Rs + 1 ? row_block<S, Rs + 1>(k, a, lda, b, ldb, c, ldc, cols, accumulate) : void()),
   ...);
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
    if (i0 < m) {
      tail_rows<S>(m - i0, k, a + static_cast<long>(i0) * lda, lda, b + j0, ldb,
                   c + static_cast<long>(i0) * ldc + j0, ldc, cols, accumulate,
                   std::make_integer_sequence<int, kRows - 1>{});
    }
  }
}

}  // namespace

void gemm_avx512(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
                 int ldc, bool accumulate) {
  gemm_impl<F32>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm_avx512(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                 double* c, int ldc, bool accumulate) {
  gemm_impl<F64>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

}  // namespace pivot::simd
