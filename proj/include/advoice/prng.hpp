#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace advoice {

// Deterministic counter-based generator (splitmix64 over a keyed counter).
// Draw i of a stream is a pure function of (seed, stream name, i), so named
// substreams are independent of each other and of draw order elsewhere.
class Prng {
 public:
  explicit Prng(std::uint64_t seed, std::string_view stream = {})
      : key_(finalize(seed ^ hash_name(stream))) {}

  // Child stream keyed by this stream plus a name.
  Prng substream(std::string_view name) const { return Prng(key_, name); }

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    return finalize(z);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  // Box-Muller; consumes two draws.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * kPi * u2);
  }

  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t hash_name(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace advoice
