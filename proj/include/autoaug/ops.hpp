#pragma once

#include <array>
#include <cstdint>

#include "autoaug/image.hpp"
#include "autoaug/rng.hpp"

// Image operations of the augmentation search space.
//
// The deterministic operations reproduce Pillow's 8-bit RGB arithmetic
// exactly (LUT construction, float32 blending, fixed-point affine sampling),
// so outputs can be compared byte-for-byte against the reference library.

namespace autoaug {

inline constexpr std::uint8_t kDefaultFill = 128;

enum class EnhanceKind { contrast, color, brightness, sharpness };
enum class AffineKind { shear_x, shear_y, translate_x, translate_y, rotate };

ImageBuffer invert(const ImageBuffer& img);

/// v -> v if v < threshold else 255 - v. threshold in [0, 256].
ImageBuffer solarize(const ImageBuffer& img, int threshold);

/// Keeps the top `bits` bits of each sample. bits in [1, 8].
ImageBuffer posterize(const ImageBuffer& img, int bits);

/// Per-channel histogram equalization (cumulative LUT).
ImageBuffer equalize(const ImageBuffer& img);

/// Per-channel linear stretch of [min, max] onto [0, 255], truncating.
ImageBuffer autocontrast(const ImageBuffer& img);

/// The image that `enhance(img, kind, 0)` returns.
ImageBuffer enhance_degenerate(const ImageBuffer& img, EnhanceKind kind);

/// Blends from the degenerate image (factor 0) through the original (factor 1)
/// and beyond. Throws ArgumentError for negative or non-finite factors.
ImageBuffer enhance(const ImageBuffer& img, EnhanceKind kind, double factor);

/// Inverse-mapped affine warp with nearest sampling at pixel centers.
/// `coeffs` = (a, b, c, d, e, f) maps output (x, y) to source (a x + b y + c, d x + e y + f).
ImageBuffer affine_transform(const ImageBuffer& img, const std::array<double, 6>& coeffs,
                             std::uint8_t fill = kDefaultFill);

/// Shear/translate by `value` (rate or pixels), or rotate counter-clockwise by
/// `value` degrees about the image center. Throws ArgumentError on non-finite value.
ImageBuffer affine(const ImageBuffer& img, AffineKind kind, double value,
                   std::uint8_t fill = kDefaultFill);

/// Half-open patch rectangle, already clipped to the image.
struct PatchRect {
  int x0, y0, x1, y1;
  bool empty() const noexcept { return x0 >= x1 || y0 >= y1; }
};

/// Draws the patch center (x, then y) from `rng` and clips a size x size square around it.
PatchRect cutout_region(int width, int height, int size, RngStream& rng);

/// Sets a random size x size patch (clipped) to gray 128. size 0 draws nothing.
ImageBuffer cutout(const ImageBuffer& img, int size, RngStream& rng);

/// round((1 - weight) * img + weight * partner). weight in [0, 1].
ImageBuffer sample_pair(const ImageBuffer& img, const ImageBuffer& partner, double weight);

/// Horizontal mirror with probability 0.5, zero padding by `pad`, random crop back to size.
ImageBuffer flip_pad_crop(const ImageBuffer& img, RngStream& rng, int pad);

ImageBuffer mirror_horizontal(const ImageBuffer& img);

}  // namespace autoaug
