#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fsgen {

// splitmix64 finalizer; used to derive independent child seeds from a base
// seed plus tags, so parallel/sequential reorganization never reuses a stream.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return mix_seed(base ^ mix_seed(tag));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1,
                                 std::uint64_t tag2) {
  return derive_seed(derive_seed(base, tag1), tag2);
}

// Deterministic RNG. std::mt19937_64 output is pinned by the standard; the
// distributions below are written out explicitly because the std ones are
// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // uniform on [0, 1), 53-bit resolution
  double uniform01() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via Box-Muller (pair cached)
  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // modulo rejection to avoid bias
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = eng_();
    while (x >= limit) x = eng_();
    return x % n;
  }

  bool coin() { return (eng_() & 1ULL) != 0; }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fsgen
