#pragma once

#include <filesystem>

#include "autoaug/image.hpp"

namespace autoaug {

/// Loads a PNG or binary PPM (P6). Grayscale and alpha inputs are converted to RGB.
/// Throws DatasetError if the file cannot be read or decoded.
ImageBuffer read_image(const std::filesystem::path& path);

/// Writes PNG, or PPM when the extension is .ppm.
void write_image(const std::filesystem::path& path, const ImageBuffer& img);

}  // namespace autoaug
