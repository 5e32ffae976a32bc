#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace autoaug {

/// Owned 8-bit RGB raster, row-major, interleaved (R, G, B per pixel).
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  /// Throws ArgumentError unless width >= 1 and height >= 1.
  ImageBuffer(int width, int height, std::uint8_t fill = 0);
  /// Throws ArgumentError unless data.size() == width * height * 3.
  ImageBuffer(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }
  const std::vector<std::uint8_t>& bytes() const noexcept { return data_; }

  std::uint8_t* row(int y) noexcept { return data_.data() + offset(0, y); }
  const std::uint8_t* row(int y) const noexcept { return data_.data() + offset(0, y); }
  std::uint8_t* pixel(int x, int y) noexcept { return data_.data() + offset(x, y); }
  const std::uint8_t* pixel(int x, int y) const noexcept { return data_.data() + offset(x, y); }

  std::uint8_t at(int x, int y, int c) const noexcept { return data_[offset(x, y) + c]; }
  std::uint8_t& at(int x, int y, int c) noexcept { return data_[offset(x, y) + c]; }

  bool same_shape(const ImageBuffer& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

/// FNV-1a over dimensions and bytes; used for cheap determinism comparisons.
std::uint64_t image_digest(const ImageBuffer& img);

}  // namespace autoaug
