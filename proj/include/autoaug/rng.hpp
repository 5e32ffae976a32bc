#pragma once

#include <cstdint>
#include <random>

namespace autoaug {

/// Mixes a seed with additional keys into a new 64-bit seed (splitmix64 finalizer chain).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key_a, std::uint64_t key_b);

/// A reproducible random stream identified by (seed, stream id).
///
/// Backed by std::mt19937_64, whose output sequence is fixed by the standard.
/// The standard distributions are not, so all derived draws are implemented
/// here to keep byte-identical results across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased uniform integer on [0, n). Requires n > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  /// +1 or -1 with equal probability.
  int sign() { return (next_u64() >> 63) ? -1 : 1; }
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller (no cached second value).
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace autoaug
