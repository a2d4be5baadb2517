#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace plvc {

/// splitmix64 finalizer, used to turn (seed, stream id) pairs into
/// well-dispersed engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic random source. Uniform and normal draws are generated
/// from raw engine output rather than std distributions, so a given seed
/// produces the same sequence on every standard library.
///
/// Streams derived with Rng::stream depend only on (seed, id); parallel
/// consumers therefore reproduce bitwise identical draws under any
/// scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  /// Counter-split child stream of a master seed.
  static Rng stream(std::uint64_t seed, std::uint64_t id) {
    return Rng(seed ^ splitmix64(0x9E3779B97F4A7C15ULL * (id + 1)));
  }

  std::uint64_t next() { return eng_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; one spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace plvc
