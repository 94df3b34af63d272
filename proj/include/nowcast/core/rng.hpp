#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace nowcast {

// SplitMix64 step (Steele/Lea/Flood). Full 64-bit avalanche per output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic generator with documented output algorithms. Streams are
/// derived by hashing (seed, stream indices), so replicate b / tree t / epoch e
/// each get an independent sequence and parallel and serial schedules agree.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed)) {}

  /// Substream keyed by (seed, k1, k2, ...).
  static Rng keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = mix(seed);
    for (std::uint64_t k : keys) {
      std::uint64_t t = s ^ (k + 0x632be59bd9b4e019ULL);
      s = splitmix64(t);
    }
    return Rng(from_state{}, s);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform on [0, 1): top 53 bits scaled by 2^-53.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). 128-bit multiply-shift; deterministic.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller; consumes two uniforms per pair.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  struct from_state {};
  Rng(from_state, std::uint64_t s) : state_(s) {}
  static std::uint64_t mix(std::uint64_t seed) {
    std::uint64_t s = seed;
    (void)splitmix64(s);
    return s;
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nowcast
