#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace genaug {

// Named sub-streams so independent consumers of one run seed never collide.
enum class RngStream : std::uint64_t {
  dataset_latents = 1,
  bank_build = 2,
  shuffle = 3,
  param_init = 4,
  augmentation = 5,
  probe = 6,
  bootstrap = 7,
  moco_queue = 8,
  reference_encoder = 9,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Fold seed material into one stream key, order-sensitive.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0,
                                 std::uint64_t d = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  h = splitmix64(h ^ d);
  return h;
}

// Deterministic per-(run, epoch, sample, view) random stream. The engine is
// mt19937_64 (fully specified by the standard); the distributions are
// hand-rolled because std:: distributions vary across library
// implementations, and identical seed material must mean identical draws.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t stream_key) : engine_(stream_key) {}

  SampleRng(std::uint64_t run_seed, RngStream stream, std::uint64_t a = 0,
            std::uint64_t b = 0, std::uint64_t c = 0)
      : engine_(derive_seed(run_seed, static_cast<std::uint64_t>(stream), a, b, c)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via polar Box-Muller (caches the second value).
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * m;
    has_cached_ = true;
    return u * m;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace genaug
