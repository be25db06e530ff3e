#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nmn {

// Deterministic draws on top of mt19937_64. The distributions are hand-rolled
// so streams do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n)
  int bounded(int n) { return static_cast<int>(eng_() % static_cast<uint64_t>(n)); }

  // Uniform integer in [lo, hi]
  int range(int lo, int hi) { return lo + bounded(hi - lo + 1); }

  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nmn
