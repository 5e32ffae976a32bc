#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autoaug/policy.hpp"

namespace autoaug {

struct OpTiming {
  std::string name;
  std::size_t calls = 0;
  double seconds = 0.0;
  double micros_per_call = 0.0;
};

struct BenchReport {
  int image_size = 32;
  std::size_t count = 0;
  int threads = 1;
  double single_seconds = 0.0;
  double single_per_second = 0.0;
  double multi_seconds = 0.0;
  double multi_per_second = 0.0;
  /// Output bytes of the multi-worker run equal the single-worker run.
  bool deterministic = true;
  std::uint64_t output_digest = 0;
  std::vector<OpTiming> per_op;

  std::string to_json() const;
};

/// Applies `p` to `count` seeded random images of side `image_size`, once on one
/// worker and once on `threads` workers, then times every operation kind alone.
BenchReport bench(const Policy& p, int image_size, std::size_t count, int threads, std::uint64_t seed = 0);

}  // namespace autoaug
