#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace skipfold {

/// Deterministic random stream used for every sampled quantity in the
/// library. mt19937_64 has a fully specified output sequence, and the
/// uniform/normal mappings below are explicit, so a seed pins the entire
/// draw sequence of a run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform draw in [-radius, radius).
  double uniform_symmetric(double radius) { return radius * (2.0 * uniform() - 1.0); }

  /// Standard normal draw via Box-Muller (pairs cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer; decorrelates derived seeds.
inline std::uint64_t mix_bits(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent sub-stream seed for item `index` of a seeded experiment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_bits(seed ^ mix_bits(index));
}

}  // namespace skipfold
