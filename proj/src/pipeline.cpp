#include "autoaug/pipeline.hpp"

#include <fstream>

#include "autoaug/errors.hpp"
#include "autoaug/image_io.hpp"
#include "autoaug/ops.hpp"

namespace autoaug {

AugmentPipeline AugmentPipeline::cifar(std::optional<Policy> policy) {
  AugmentPipeline pl;
  pl.flip_pad_crop = true;
  pl.pad = 4;
  pl.policy = std::move(policy);
  pl.cutout = 16;
  return pl;
}

ImageBuffer run_pipeline(const AugmentPipeline& pl, const ImageBuffer& img, RngStream& rng,
                         const BatchContext& ctx) {
  if (pl.pad < 0) throw ArgumentError("pad must be >= 0");
  if (pl.cutout < 0) throw ArgumentError("cutout must be >= 0");
  ImageBuffer out = img;
  if (pl.flip_pad_crop) out = flip_pad_crop(out, rng, pl.pad);
  if (pl.policy) out = apply_policy(*pl.policy, out, rng, ctx);
  if (pl.cutout > 0) out = cutout(out, pl.cutout, rng);
  return out;
}

GridResult render_grid(const Policy& p, std::span<const ImageBuffer> images, std::uint64_t seed,
                       int columns) {
  if (images.empty()) throw ArgumentError("render_grid needs at least one image");
  if (columns < 1) throw ArgumentError("columns must be >= 1");
  const int cw = images.front().width();
  const int ch = images.front().height();
  for (const ImageBuffer& img : images) {
    if (img.width() != cw || img.height() != ch) throw ArgumentError("grid images must share dimensions");
  }
  const int rows = static_cast<int>(p.size());
  ImageBuffer grid(cw * columns, ch * rows);
  std::string legend;
  for (int r = 0; r < rows; ++r) {
    const ImageBuffer& src = images[static_cast<std::size_t>(r) % images.size()];
    const BatchContext ctx{images, static_cast<std::size_t>(r) % images.size()};
    legend += "row " + std::to_string(r) + ": " + format_sub_policy(p[r]) + "\n";
    for (int c = 0; c < columns; ++c) {
      RngStream rng(seed, static_cast<std::uint64_t>(r) * columns + c);
      const ImageBuffer cell = apply_sub_policy(p[r], src, rng, ctx);
      for (int y = 0; y < ch; ++y) {
        std::copy(cell.row(y), cell.row(y) + cw * 3, grid.pixel(c * cw, r * ch + y));
      }
    }
  }
  return {std::move(grid), std::move(legend)};
}

void write_grid(const std::filesystem::path& out, const GridResult& grid) {
  write_image(out, grid.image);
  std::ofstream legend(out.string() + ".txt");
  legend << grid.legend;
  if (!legend) throw DatasetError("cannot write legend for " + out.string());
}

}  // namespace autoaug
