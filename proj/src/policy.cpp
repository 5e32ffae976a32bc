#include "autoaug/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "autoaug/errors.hpp"
#include "autoaug/ops.hpp"

namespace autoaug {
namespace {

constexpr std::array<std::string_view, kNumOpKinds> kOpNames = {
    "ShearX",   "ShearY",   "TranslateX", "TranslateY", "Rotate",     "AutoContrast",
    "Invert",   "Equalize", "Solarize",   "Posterize",  "Contrast",   "Color",
    "Brightness", "Sharpness", "Cutout",  "SamplePairing"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Probability in {0.0, 0.1, ..., 1.0}; returns the index or nullopt when off-grid.
std::optional<int> prob_to_index(double p) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) return std::nullopt;
  const double scaled = p * 10.0;
  const double r = std::round(scaled);
  if (std::fabs(scaled - r) > 1e-9) return std::nullopt;
  return static_cast<int>(r);
}

std::string format_prob(int prob_index) {
  return std::to_string(prob_index / 10) + "." + std::to_string(prob_index % 10);
}

OperationSpec parse_operation(std::string_view text, std::size_t line) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '(' || text.back() != ')') {
    throw ParseError(line, "expected '(Kind,probability,magnitude)', got '" + std::string(text) + "'");
  }
  text = text.substr(1, text.size() - 2);
  std::array<std::string_view, 3> fields;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto comma = text.find(',');
    if ((comma == std::string_view::npos) != (i == 2)) {
      throw ParseError(line, "operation must have exactly three fields");
    }
    fields[i] = trim(text.substr(0, comma));
    if (comma != std::string_view::npos) text.remove_prefix(comma + 1);
  }
  const auto kind = op_from_name(fields[0]);
  if (!kind) throw ParseError(line, "unknown operation '" + std::string(fields[0]) + "'");

  double prob = 0.0;
  auto [pend, perr] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), prob);
  if (perr != std::errc() || pend != fields[1].data() + fields[1].size()) {
    throw ParseError(line, "bad probability '" + std::string(fields[1]) + "'");
  }
  const auto prob_index = prob_to_index(prob);
  if (!prob_index) {
    throw ParseError(line, "probability " + std::string(fields[1]) + " is not on the 11-level grid");
  }

  int mag = 0;
  auto [mend, merr] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), mag);
  if (merr != std::errc() || mend != fields[2].data() + fields[2].size() || mag < 0 ||
      mag >= kMagLevels) {
    throw ParseError(line, "magnitude must be an integer in 0..9, got '" + std::string(fields[2]) + "'");
  }
  return OperationSpec{*kind, *prob_index, mag};
}

SubPolicy parse_sub_policy(std::string_view text, std::size_t line) {
  const auto amp = text.find('&');
  if (amp == std::string_view::npos || text.find('&', amp + 1) != std::string_view::npos) {
    throw ParseError(line, "sub-policy must be two operations joined by '&'");
  }
  return SubPolicy{{parse_operation(text.substr(0, amp), line),
                    parse_operation(text.substr(amp + 1), line)}};
}

EnhanceKind enhance_kind(OpKind kind) {
  switch (kind) {
    case OpKind::Contrast: return EnhanceKind::contrast;
    case OpKind::Color: return EnhanceKind::color;
    case OpKind::Brightness: return EnhanceKind::brightness;
    default: return EnhanceKind::sharpness;
  }
}

}  // namespace

std::string_view op_name(OpKind kind) { return kOpNames.at(static_cast<std::size_t>(kind)); }

std::optional<OpKind> op_from_name(std::string_view name) {
  const auto it = std::find(kOpNames.begin(), kOpNames.end(), name);
  if (it == kOpNames.end()) return std::nullopt;
  return static_cast<OpKind>(it - kOpNames.begin());
}

OpKind op_from_index(int index) {
  if (index < 0 || index >= kNumOpKinds) {
    throw ArgumentError("operation index out of range: " + std::to_string(index));
  }
  return static_cast<OpKind>(index);
}

bool uses_magnitude(OpKind kind) {
  return kind != OpKind::AutoContrast && kind != OpKind::Invert && kind != OpKind::Equalize;
}

void OperationSpec::validate() const {
  if (static_cast<int>(kind) >= kNumOpKinds) throw ArgumentError("invalid operation kind");
  if (prob_index < 0 || prob_index >= kProbLevels) {
    throw ArgumentError("probability index must be in 0..10, got " + std::to_string(prob_index));
  }
  if (mag_index < 0 || mag_index >= kMagLevels) {
    throw ArgumentError("magnitude index must be in 0..9, got " + std::to_string(mag_index));
  }
}

Policy::Policy(std::vector<SubPolicy> sub_policies) : subs_(std::move(sub_policies)) {
  if (subs_.empty()) throw ArgumentError("policy must contain at least one sub-policy");
  for (const SubPolicy& sp : subs_) {
    for (const OperationSpec& op : sp.ops) op.validate();
  }
}

double magnitude_value(OpKind kind, int mag_index, int image_size, RngStream& rng) {
  if (mag_index < 0 || mag_index >= kMagLevels) {
    throw ArgumentError("magnitude index must be in 0..9");
  }
  const double level = mag_index / 9.0;
  const double pixel_scale = static_cast<double>(image_size) / kReferenceImageSize;
  switch (kind) {
    case OpKind::ShearX:
    case OpKind::ShearY:
      return rng.sign() * level * 0.3;
    case OpKind::TranslateX:
    case OpKind::TranslateY:
      return rng.sign() * level * 150.0 * pixel_scale;
    case OpKind::Rotate:
      return rng.sign() * level * 30.0;
    case OpKind::AutoContrast:
    case OpKind::Invert:
    case OpKind::Equalize:
      return 0.0;
    case OpKind::Solarize:
      return 256.0 * (1.0 - level);
    case OpKind::Posterize:
      return std::round(8.0 - level * 4.0);
    case OpKind::Contrast:
    case OpKind::Color:
    case OpKind::Brightness:
    case OpKind::Sharpness:
      return 1.0 + rng.sign() * level * 0.9;
    case OpKind::Cutout:
      return level * 60.0 * pixel_scale;
    case OpKind::SamplePairing:
      return level * 0.4;
  }
  throw ArgumentError("invalid operation kind");
}

ImageBuffer apply_operation(const OperationSpec& op, const ImageBuffer& img, RngStream& rng,
                            const BatchContext& ctx) {
  const int size = std::max(img.width(), img.height());
  const double v = magnitude_value(op.kind, op.mag_index, size, rng);
  switch (op.kind) {
    case OpKind::ShearX: return affine(img, AffineKind::shear_x, v);
    case OpKind::ShearY: return affine(img, AffineKind::shear_y, v);
    case OpKind::TranslateX: return affine(img, AffineKind::translate_x, v);
    case OpKind::TranslateY: return affine(img, AffineKind::translate_y, v);
    case OpKind::Rotate: return affine(img, AffineKind::rotate, v);
    case OpKind::AutoContrast: return autocontrast(img);
    case OpKind::Invert: return invert(img);
    case OpKind::Equalize: return equalize(img);
    case OpKind::Solarize: return solarize(img, static_cast<int>(std::lround(v)));
    case OpKind::Posterize: return posterize(img, static_cast<int>(v));
    case OpKind::Contrast:
    case OpKind::Color:
    case OpKind::Brightness:
    case OpKind::Sharpness:
      return enhance(img, enhance_kind(op.kind), v);
    case OpKind::Cutout: return cutout(img, static_cast<int>(std::lround(v)), rng);
    case OpKind::SamplePairing: {
      const std::size_t n = ctx.images.size();
      const bool has_self = ctx.self_index && *ctx.self_index < n;
      const std::size_t candidates = has_self ? n - 1 : n;
      if (candidates == 0) return img;
      std::size_t j = static_cast<std::size_t>(rng.uniform_int(candidates));
      if (has_self && j >= *ctx.self_index) ++j;
      return sample_pair(img, ctx.images[j], v);
    }
  }
  throw ArgumentError("invalid operation kind");
}

ImageBuffer apply_sub_policy(const SubPolicy& sp, const ImageBuffer& img, RngStream& rng,
                             const BatchContext& ctx) {
  ImageBuffer out = img;
  for (const OperationSpec& op : sp.ops) {
    // u < prob_index / 10, compared on the integer grid.
    if (rng.uniform() * 10.0 < op.prob_index) out = apply_operation(op, out, rng, ctx);
  }
  return out;
}

ImageBuffer apply_policy(const Policy& p, const ImageBuffer& img, RngStream& rng,
                         const BatchContext& ctx) {
  const auto idx = static_cast<std::size_t>(rng.uniform_int(p.size()));
  return apply_sub_policy(p[idx], img, rng, ctx);
}

std::string format_sub_policy(const SubPolicy& sp) {
  std::string out;
  for (std::size_t i = 0; i < 2; ++i) {
    const OperationSpec& op = sp.ops[i];
    if (i) out += '&';
    out += '(';
    out += op_name(op.kind);
    out += ',' + format_prob(op.prob_index) + ',' + std::to_string(op.mag_index) + ')';
  }
  return out;
}

Policy parse_policy(std::string_view text) {
  std::vector<SubPolicy> subs;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (line.empty() || line.front() == '#') continue;
    subs.push_back(parse_sub_policy(line, line_no));
  }
  if (subs.empty()) throw ParseError(0, "policy text contains no sub-policies");
  return Policy(std::move(subs));
}

std::string serialize_policy(const Policy& p) {
  std::string out;
  for (const SubPolicy& sp : p.sub_policies()) out += format_sub_policy(sp) + '\n';
  return out;
}

Policy read_policy_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open policy file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_policy(ss.str());
}

void write_policy_file(const std::filesystem::path& path, const Policy& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write policy file " + path.string());
  out << serialize_policy(p);
}

nlohmann::json policy_to_json(const Policy& p) {
  nlohmann::json j = nlohmann::json::array();
  for (const SubPolicy& sp : p.sub_policies()) {
    nlohmann::json ops = nlohmann::json::array();
    for (const OperationSpec& op : sp.ops) {
      ops.push_back({std::string(op_name(op.kind)), op.probability(), op.mag_index});
    }
    j.push_back(std::move(ops));
  }
  return j;
}

Policy policy_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ParseError(0, "policy must be a non-empty array");
  std::vector<SubPolicy> subs;
  for (std::size_t s = 0; s < j.size(); ++s) {
    const auto& jsp = j[s];
    if (!jsp.is_array() || jsp.size() != 2) {
      throw ParseError(s + 1, "sub-policy must be an array of two operations");
    }
    SubPolicy sp;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& jop = jsp[i];
      if (!jop.is_array() || jop.size() != 3 || !jop[0].is_string() || !jop[1].is_number() ||
          !jop[2].is_number_integer()) {
        throw ParseError(s + 1, "operation must be [kind, probability, magnitude]");
      }
      const auto kind = op_from_name(jop[0].get<std::string>());
      if (!kind) throw ParseError(s + 1, "unknown operation '" + jop[0].get<std::string>() + "'");
      const auto prob = prob_to_index(jop[1].get<double>());
      if (!prob) throw ParseError(s + 1, "probability is not on the 11-level grid");
      const int mag = jop[2].get<int>();
      if (mag < 0 || mag >= kMagLevels) throw ParseError(s + 1, "magnitude must be in 0..9");
      sp.ops[i] = OperationSpec{*kind, *prob, mag};
    }
    subs.push_back(sp);
  }
  return Policy(std::move(subs));
}

std::string search_space_size(int num_sub_policies) {
  if (num_sub_policies < 1) throw ArgumentError("search_space_size: need at least one sub-policy");
  using boost::multiprecision::cpp_int;
  const cpp_int per_op = cpp_int(kNumOpKinds) * kMagLevels * kProbLevels;
  cpp_int total = 1;
  for (int i = 0; i < 2 * num_sub_policies; ++i) total *= per_op;
  return total.str();
}

}  // namespace autoaug
