#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "autoaug/image.hpp"
#include "autoaug/rng.hpp"

namespace autoaug::testing {

std::filesystem::path source_dir();
std::filesystem::path oracle_dir();
std::filesystem::path policy_dir();

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p);
std::string read_text(const std::filesystem::path& p);

ImageBuffer random_image(int w, int h, std::uint64_t seed);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

struct OracleCaseResult {
  std::string set;
  std::string op;
  std::size_t images = 0;
  std::size_t mismatched_bytes = 0;
  std::size_t mismatched_images = 0;
};

/// Replays every frozen reference case through the library.
std::vector<OracleCaseResult> run_oracle_fixtures();

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

/// Analytic vs central-difference gradient of the controller objective.
struct GradCheckResult {
  /// max over parameter blocks of |a - n| / max(|a|, |n|), norms over the block
  double max_block_rel = 0.0;
  std::string worst_block;
  /// max over elements of |a - n| / max(|a|, |n|, 1e-6)
  double max_elem_rel = 0.0;
  double max_abs = 0.0;
  std::size_t parameters = 0;
};

GradCheckResult controller_gradient_check(std::uint64_t seed, int embedding, int hidden, double step);

/// Runs a shell command, capturing stdout (stderr is merged when merge_stderr).
CommandResult run_command(const std::string& cmd, bool merge_stderr = false);

}  // namespace autoaug::testing
