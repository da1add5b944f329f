#pragma once

#include <cmath>
#include <cstdint>
#include <vector>
#include <random>

namespace v2v {

// Deterministic random helpers on top of std::mt19937_64.
//
// All distributions are hand-rolled so that a seeded stream produces the
// same values on every platform and standard library (std distributions
// are implementation-defined). Golden-value tests and the bitwise
// reproducibility contract depend on this.
class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer, inclusive bounds
  int uniform_int(int lo, int hi) {
    const uint64_t range = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<int>(x % range);
  }

  // Knuth multiplication method; adequate for the arrival rates used here.
  int poisson(double lambda) {
    const double threshold = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > threshold);
    return k - 1;
  }

  // Box-Muller, cosine branch; consumes two uniforms per draw.
  double normal() {
    constexpr double two_pi = 6.283185307179586476925286766559;
    double u1 = uniform();
    const double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Fisher-Yates; std::shuffle is implementation-defined.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i - 1)));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 gen_;
};

// splitmix64; used to derive independent sub-stream seeds from a run seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace v2v
