#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace slip {

/// Seeded generator with platform-independent draws.
///
/// std::mt19937_64's raw output is fixed by the standard, but the standard
/// distributions are not, so uniform/normal/index draws are derived here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Seed mixed from a base seed and a path of stream labels, so independent
  /// streams (epoch, batch, purpose) never share state.
  static Rng derive(std::uint64_t base, std::span<const std::uint64_t> path);
  static Rng derive(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    return derive(base, std::span<const std::uint64_t>(path.begin(), path.size()));
  }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace slip
