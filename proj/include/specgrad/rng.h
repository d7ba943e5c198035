/*
 * Splittable 64-bit RNG (splitmix64).  Every stochastic component receives
 * its own stream derived from a master seed, so adding or removing a run in
 * a config file never perturbs the draws of the others.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace specgrad {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /* Uniform in [0, 1) with 53 random bits. */
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /* Standard normal via Box-Muller; caches the second value of each pair. */
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();  /* log(0) guard */
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /* Independent child stream.  The child state is a fresh draw from this
   * stream, so parent and child sequences do not overlap in practice. */
  SplitMix64 split() { return SplitMix64(next_u64()); }

  void fill_gaussian(std::span<double> out) {
    for (double& v : out) v = next_gaussian();
  }

  void fill_uniform(std::span<double> out) {
    for (double& v : out) v = next_double();
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace specgrad
