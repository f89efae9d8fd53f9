#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace xdomid {

// Deterministic generator. Gaussians go through Box-Muller on raw 64-bit
// draws instead of std::normal_distribution, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed ^ 0x9e3779b97f4a7c15ull) {}

  double uniform() {  // [0, 1)
    return (gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t next_u64() { return gen_(); }

  int uniform_int(int n) {  // [0, n)
    return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = gen_() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  // Stable key derivation so independent random streams (init, shuffling,
  // per-image noise) never share state.
  static std::uint64_t key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint64_t p : parts) {
      for (int b = 0; b < 8; ++b) {
        h ^= (p >> (8 * b)) & 0xff;
        h *= 0x100000001b3ull;
      }
    }
    return h;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace xdomid
