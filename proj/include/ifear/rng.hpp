#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ifear {

// FNV-1a over a stable string key. Used together with splitmix64 to derive
// per-component seeds from one master seed, so adding a new consumer of
// randomness does not shift the streams of existing ones.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view key) {
  return splitmix64(master ^ fnv1a64(key));
}

/// Deterministic random source backed by mt19937_64. The distributions are
/// implemented explicitly rather than through std::*_distribution, whose
/// output is implementation-defined; a given seed must yield the same stream
/// everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform draw in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Requires n > 0.
  int uniform_int(int n) {
    return static_cast<int>(uniform() * static_cast<double>(n));
  }

  /// Gaussian draw via Box-Muller; consumes exactly two uniforms per call.
  double normal(double mean, double sd) {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Exponential(1) draw, the building block for Dirichlet rows.
  double exponential() { return -std::log(1.0 - uniform()); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ifear
