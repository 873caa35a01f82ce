#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace topicdial {

// Deterministic draws on top of mt19937_64. The std distribution adapters are
// implementation-defined, so everything that must reproduce bit-for-bit goes
// through these helpers instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // uniform integer in [0, n)
  std::uint64_t uniform(std::uint64_t n) { return n <= 1 ? 0 : next() % n; }

  // uniform real in [0, 1)
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double two_pi = 6.283185307179586476925286766559;
    double u1 = (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    double u2 = (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64-style mixer; gives independent streams from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace topicdial
