#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autoaug/image.hpp"
#include "autoaug/policy.hpp"
#include "autoaug/rng.hpp"

namespace autoaug {

/// Stages run in a fixed order: flip + pad-crop, learned policy, fixed Cutout.
struct AugmentPipeline {
  bool flip_pad_crop = false;
  int pad = 4;
  std::optional<Policy> policy;
  int cutout = 0;  ///< side in pixels; 0 disables the stage

  bool empty() const noexcept { return !flip_pad_crop && !policy && cutout == 0; }
  /// Standard CIFAR recipe: flip + 4 px pad-crop, the policy, then 16 px Cutout.
  static AugmentPipeline cifar(std::optional<Policy> policy);
};

ImageBuffer run_pipeline(const AugmentPipeline& pl, const ImageBuffer& img, RngStream& rng,
                         const BatchContext& ctx = {});

struct GridResult {
  ImageBuffer image;
  std::string legend;
};

/// Rows are sub-policies, columns independent applications to images[row % images.size()].
/// Every cell draws from its own stream (seed, row * columns + column).
GridResult render_grid(const Policy& p, std::span<const ImageBuffer> images, std::uint64_t seed,
                       int columns);

/// Writes the grid image plus a legend next to it (`<out>.txt`).
void write_grid(const std::filesystem::path& out, const GridResult& grid);

}  // namespace autoaug
