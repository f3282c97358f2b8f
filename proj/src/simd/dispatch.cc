#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "pivot/simd/gemm.h"

namespace pivot::simd {
namespace {

bool cpu_has(Isa isa) {
#if defined(__x86_64__) || defined(__i386__)
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(PIVOT_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kAvx512:
#if defined(PIVOT_HAVE_AVX512)
      return __builtin_cpu_supports("avx512f");
#else
      return false;
#endif
  }
  return false;
#else
  return isa == Isa::kScalar;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("PIVOT_TOUCH_SIMD")) {
    if (auto isa = parse_isa(env); isa && cpu_has(*isa)) return *isa;
  }
  for (Isa isa : {Isa::kAvx512, Isa::kAvx2}) {
    if (cpu_has(isa)) return isa;
  }
  return Isa::kScalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

template <typename T>
void dispatch(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc,
              bool accumulate) {
  if (m <= 0 || n <= 0) return;
  switch (active().load(std::memory_order_relaxed)) {
#if defined(PIVOT_HAVE_AVX512)
    case Isa::kAvx512:
      gemm_avx512(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
      return;
#endif
#if defined(PIVOT_HAVE_AVX2)
    case Isa::kAvx2:
      gemm_avx2(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
      return;
#endif
    default:
      gemm_scalar(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
      return;
  }
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kAvx512: return "avx512";
  }
  return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) {
  for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kAvx512}) {
    if (isa_name(isa) == name) return isa;
  }
  return std::nullopt;
}

bool isa_supported(Isa isa) { return cpu_has(isa); }

std::vector<Isa> supported_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kAvx512}) {
    if (cpu_has(isa)) out.push_back(isa);
  }
  return out;
}

Isa active_isa() { return active().load(); }

void set_active_isa(Isa isa) {
  if (!cpu_has(isa)) throw std::invalid_argument("unsupported ISA: " + std::string(isa_name(isa)));
  active().store(isa);
}

void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
          bool accumulate) {
  dispatch(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
          int ldc, bool accumulate) {
  dispatch(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

}  // namespace pivot::simd
