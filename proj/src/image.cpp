#include "autoaug/image.hpp"

#include <string>

#include "autoaug/errors.hpp"

namespace autoaug {
namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw ArgumentError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                        std::to_string(height));
  }
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  const std::size_t expected = static_cast<std::size_t>(width) * height * kChannels;
  if (data_.size() != expected) {
    throw ArgumentError("image data has " + std::to_string(data_.size()) + " bytes, expected " +
                        std::to_string(expected));
  }
}

std::uint64_t image_digest(const ImageBuffer& img) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (int shift = 0; shift < 32; shift += 8) {
    mix(static_cast<std::uint8_t>(img.width() >> shift));
    mix(static_cast<std::uint8_t>(img.height() >> shift));
  }
  for (std::uint8_t b : img.data()) mix(b);
  return h;
}

}  // namespace autoaug
