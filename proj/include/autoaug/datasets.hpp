#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "autoaug/image.hpp"

namespace autoaug {

struct LabeledDataset {
  std::vector<ImageBuffer> images;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
  /// Throws DatasetError on size mismatch, mixed dimensions or out-of-range labels.
  void validate() const;
  /// Number of distinct labels present.
  int distinct_labels() const;
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

inline constexpr std::size_t kCifarRecordBytes = 1 + 32 * 32 * 3;

/// Decodes CIFAR-10 binary records (label byte + R, G, B planes of 32x32).
LabeledDataset decode_cifar10(const std::vector<std::uint8_t>& bytes, const std::string& origin = "buffer");
LabeledDataset load_cifar10_binary(const std::filesystem::path& path);
/// Concatenates several batch files in the order given.
LabeledDataset load_cifar10_binary(const std::vector<std::filesystem::path>& paths);

/// Manifest lines "relative/path.png,label", relative to the manifest's directory.
/// Blank lines and lines starting with '#' are ignored.
LabeledDataset load_image_directory(const std::filesystem::path& manifest);

/// Uniform sample of n examples without replacement. Throws DatasetError if n > size.
LabeledDataset reduce_dataset(const LabeledDataset& d, std::size_t n, std::uint64_t seed);

/// Seeded shuffle then split; the first part receives round(fraction * size) examples.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d, double fraction,
                                                        std::uint64_t seed);

struct Invariances {
  bool invert = false;
  bool shear = false;
  bool rotate = false;

  bool any() const noexcept { return invert || shear || rotate; }
  /// Parses a comma list such as "invert,rotate"; empty or "none" gives no invariances.
  static Invariances parse(const std::string& text);
  std::string to_string() const;
};

struct SynthOptions {
  std::size_t train = 200;
  std::size_t val = 200;
  std::size_t test = 200;
  int num_classes = 10;
  Invariances invariances;
};

struct SynthSplits {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

/// Seven-segment digit glyphs at 32x32 with jittered position, stroke and colors.
/// Training images are canonical (bright glyph on dark ground). Validation and test
/// images each receive every enabled invariance with probability 0.5.
SynthSplits synth_invariance(const SynthOptions& opts, std::uint64_t seed);

struct ChannelStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
  /// Channels whose std was zero and has been replaced by 1.
  std::vector<int> degenerate_channels;

  std::string to_json() const;
  static ChannelStats from_json(const std::string& text);
};

/// Per-channel mean and population standard deviation. Throws DatasetError if empty.
ChannelStats compute_channel_stats(const LabeledDataset& d);

/// (v - mean) / std per sample, interleaved layout, written to `out` (size = pixels * 3).
void standardize_into(const ImageBuffer& img, const ChannelStats& stats, float* out);
std::vector<float> standardize(const ImageBuffer& img, const ChannelStats& stats);

}  // namespace autoaug
