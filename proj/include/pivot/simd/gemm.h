#pragma once

#include <optional>
#include <string_view>
#include <vector>

namespace pivot::simd {

enum class Isa { kScalar, kAvx2, kAvx512 };

std::string_view isa_name(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);

// True when the variant was compiled in and the CPU supports it.
bool isa_supported(Isa isa);
std::vector<Isa> supported_isas();

// Kernel family used by gemm(). Defaults to the widest supported variant;
// the PIVOT_TOUCH_SIMD environment variable (scalar, avx2, avx512) overrides.
Isa active_isa();
// Throws std::invalid_argument when the ISA is unsupported.
void set_active_isa(Isa isa);

// Row-major C[MxN] = (accumulate ? C : 0) + A[MxK] * B[KxN].
//
// Every variant forms each output element as a chain of fused multiply-adds
// in increasing k, so results are bit-identical across variants.
void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
          bool accumulate);
void gemm(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
          int ldc, bool accumulate);

// Explicit variants, exposed for equivalence tests and benchmarks.
void gemm_scalar(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
                 int ldc, bool accumulate);
void gemm_scalar(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
                 int ldc, bool accumulate);
void gemm_avx2(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
               int ldc, bool accumulate);
void gemm_avx2(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
               int ldc, bool accumulate);
void gemm_avx512(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
                 int ldc, bool accumulate);
void gemm_avx512(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
                 int ldc, bool accumulate);

// out[KxM] = in[MxK]^T.
template <typename T>
void transpose(int m, int k, const T* in, T* out) {
  constexpr int kBlock = 32;
  for (int i0 = 0; i0 < m; i0 += kBlock) {
    for (int j0 = 0; j0 < k; j0 += kBlock) {
      const int i1 = i0 + kBlock < m ? i0 + kBlock : m;
      const int j1 = j0 + kBlock < k ? j0 + kBlock : k;
      for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j) out[static_cast<long>(j) * m + i] = in[static_cast<long>(i) * k + j];
    }
  }
}

}  // namespace pivot::simd
