#ifndef KSHC_RNG_HPP
#define KSHC_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace kshc {

/// splitmix64 step; used to spread user seeds and derive per-path streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Independent stream seed for one Monte Carlo path. Stable across platforms
/// and worker counts: path p always sees the same stream.
inline std::uint64_t path_seed(std::uint64_t base_seed, std::uint64_t path_index) {
  std::uint64_t s = base_seed;
  std::uint64_t a = splitmix64(s);
  s = a ^ (path_index + 0x9E3779B97F4A7C15ULL);
  return splitmix64(s);
}

/**
 * Gaussian generator with a fully specified algorithm (Box-Muller on raw
 * mt19937_64 bits). std::normal_distribution is implementation-defined, which
 * would break the byte-identical reproducibility contract across toolchains.
 */
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in the open interval (0,1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Time grid plus i.i.d. N(0,dt) increments of one Brownian sample path.
struct BrownianPath {
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> increments;

  int n_steps() const { return static_cast<int>(increments.size()); }

  static BrownianPath generate(double dt, int n_steps, std::uint64_t seed);

  /// Sum consecutive groups of `factor` increments: the same path sampled at
  /// step factor*dt. Requires n_steps divisible by factor.
  BrownianPath coarsen(int factor) const;
};

}  // namespace kshc

#endif
