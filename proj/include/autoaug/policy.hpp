#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "autoaug/image.hpp"
#include "autoaug/rng.hpp"

namespace autoaug {

enum class OpKind : std::uint8_t {
  ShearX,
  ShearY,
  TranslateX,
  TranslateY,
  Rotate,
  AutoContrast,
  Invert,
  Equalize,
  Solarize,
  Posterize,
  Contrast,
  Color,
  Brightness,
  Sharpness,
  Cutout,
  SamplePairing,
};

inline constexpr int kNumOpKinds = 16;
inline constexpr int kProbLevels = 11;
inline constexpr int kMagLevels = 10;
/// Image side the magnitude ranges are quoted for; pixel magnitudes scale by size / 331.
inline constexpr int kReferenceImageSize = 331;

std::string_view op_name(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);
OpKind op_from_index(int index);
bool uses_magnitude(OpKind kind);

struct OperationSpec {
  OpKind kind = OpKind::ShearX;
  int prob_index = 0;  ///< 0..10, probability = prob_index / 10
  int mag_index = 0;   ///< 0..9

  double probability() const noexcept { return prob_index / 10.0; }
  /// Throws ArgumentError if an index is off the grid.
  void validate() const;

  friend bool operator==(const OperationSpec&, const OperationSpec&) = default;
};

struct SubPolicy {
  std::array<OperationSpec, 2> ops;

  friend bool operator==(const SubPolicy&, const SubPolicy&) = default;
};

/// Ordered, non-empty list of sub-policies; one is drawn uniformly per image.
class Policy {
 public:
  /// Throws ArgumentError if empty or if any operation is off the grid.
  explicit Policy(std::vector<SubPolicy> sub_policies);

  std::size_t size() const noexcept { return subs_.size(); }
  const SubPolicy& operator[](std::size_t i) const { return subs_[i]; }
  std::span<const SubPolicy> sub_policies() const noexcept { return subs_; }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  std::vector<SubPolicy> subs_;
};

/// The mini-batch an image belongs to, for SamplePairing partner selection.
struct BatchContext {
  std::span<const ImageBuffer> images;
  /// Position of the current image inside `images`; excluded from partner choice.
  std::optional<std::size_t> self_index;
};

/// Concrete operation parameter for a magnitude index. Signed ranges and the
/// enhancement factors draw a random sign from `rng`; other kinds draw nothing.
double magnitude_value(OpKind kind, int mag_index, int image_size, RngStream& rng);

/// Applies one operation unconditionally (the probability gate is the caller's).
ImageBuffer apply_operation(const OperationSpec& op, const ImageBuffer& img, RngStream& rng,
                            const BatchContext& ctx);

ImageBuffer apply_sub_policy(const SubPolicy& sp, const ImageBuffer& img, RngStream& rng,
                             const BatchContext& ctx = {});

ImageBuffer apply_policy(const Policy& p, const ImageBuffer& img, RngStream& rng,
                         const BatchContext& ctx = {});

/// Text format: one sub-policy per line, "(Kind,prob,mag)&(Kind,prob,mag)".
/// Blank lines and lines starting with '#' are skipped.
Policy parse_policy(std::string_view text);
std::string serialize_policy(const Policy& p);
std::string format_sub_policy(const SubPolicy& sp);

Policy read_policy_file(const std::filesystem::path& path);
void write_policy_file(const std::filesystem::path& path, const Policy& p);

/// [[["Invert", 0.1, 7], ["Contrast", 0.2, 6]], ...]
nlohmann::json policy_to_json(const Policy& p);
Policy policy_from_json(const nlohmann::json& j);

/// Exact (16 * 10 * 11)^(2n) as a decimal string. Throws ArgumentError for n < 1.
std::string search_space_size(int num_sub_policies);

}  // namespace autoaug
