#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace rrmix {

// Deterministic RNG. Distributions are implemented here rather than taken
// from <random> because the standard leaves normal/shuffle algorithms
// implementation-defined; seeded artifacts must be reproducible byte for
// byte across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // uniform on [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller with cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // uniform integer on [0, n), n > 0; rejection sampling keeps it unbiased
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t x = gen_();
      if (x >= threshold) return x % n;
    }
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  template <class T>
  void shuffle(std::vector<T>& v) {  // Fisher-Yates
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // splitmix64-style stream derivation for per-task seeds
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                           std::uint64_t c = 0) {
    auto step = [](std::uint64_t& s) {
      s += 0x9e3779b97f4a7c15ull;
      std::uint64_t z = s;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      return z ^ (z >> 31);
    };
    std::uint64_t s = seed;
    std::uint64_t h = step(s);
    s ^= a + 0x632be59bd9b4e019ull;
    h ^= step(s);
    s ^= b + 0x9e3779b97f4a7c15ull;
    h ^= step(s);
    s ^= c + 0xd6e8feb86659fd93ull;
    h ^= step(s);
    return h;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rrmix
