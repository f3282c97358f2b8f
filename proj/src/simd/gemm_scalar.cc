#include <cmath>

#include "pivot/simd/gemm.h"

namespace pivot::simd {
namespace {

template <typename T>
void gemm_reference(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc,
                    bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<long>(i) * ldc;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    }
    const T* arow = a + static_cast<long>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + static_cast<long>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

}  // namespace

void gemm_scalar(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
                 int ldc, bool accumulate) {
  gemm_reference(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm_scalar(int m, int n, int k, const double* a, int lda, const double* b, int ldb,
                 double* c, int ldc, bool accumulate) {
  gemm_reference(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

}  // namespace pivot::simd
