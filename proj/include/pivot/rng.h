#pragma once

#include <cstdint>
#include <random>

namespace pivot {

// Seeded random stream. Every stochastic component takes one of these
// explicitly, so a seed fully determines a run on a given platform.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  double uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double uniform01() { return uniform(0.0, 1.0); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return mean + stddev * normal_(engine_);
  }
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  bool bernoulli(double p) { return uniform01() < p; }
  uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Per-environment stream seed: master * 10007 + index.
constexpr uint64_t env_stream_seed(uint64_t master, uint64_t index) {
  return master * 10007ULL + index;
}

}  // namespace pivot
