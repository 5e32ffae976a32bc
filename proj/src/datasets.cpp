#include "autoaug/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "autoaug/errors.hpp"
#include "autoaug/image_io.hpp"
#include "autoaug/ops.hpp"
#include "autoaug/rng.hpp"

namespace autoaug {

void LabeledDataset::validate() const {
  if (images.size() != labels.size()) {
    throw DatasetError("dataset has " + std::to_string(images.size()) + " images but " +
                       std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 1) throw DatasetError("dataset must declare at least one class");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(images.front())) {
      throw DatasetError("image " + std::to_string(i) + " has different dimensions");
    }
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DatasetError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                         " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

int LabeledDataset::distinct_labels() const {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.images.push_back(images.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

LabeledDataset decode_cifar10(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw DatasetError(origin + ": length " + std::to_string(bytes.size()) +
                       " is not a multiple of " + std::to_string(kCifarRecordBytes));
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  constexpr std::size_t plane = 32 * 32;
  LabeledDataset out;
  out.num_classes = 10;
  out.images.reserve(n);
  out.labels.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw DatasetError(origin + ": record " + std::to_string(r) + " has label " +
                         std::to_string(rec[0]));
    }
    std::vector<std::uint8_t> px(plane * 3);
    for (std::size_t i = 0; i < plane; ++i) {
      px[i * 3 + 0] = rec[1 + i];
      px[i * 3 + 1] = rec[1 + plane + i];
      px[i * 3 + 2] = rec[1 + 2 * plane + i];
    }
    out.images.emplace_back(32, 32, std::move(px));
    out.labels.push_back(rec[0]);
  }
  return out;
}

LabeledDataset load_cifar10_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_cifar10(bytes, path.string());
}

LabeledDataset load_cifar10_binary(const std::vector<std::filesystem::path>& paths) {
  LabeledDataset all;
  all.num_classes = 10;
  for (const auto& p : paths) {
    LabeledDataset part = load_cifar10_binary(p);
    std::move(part.images.begin(), part.images.end(), std::back_inserter(all.images));
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
  }
  return all;
}

LabeledDataset load_image_directory(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DatasetError("cannot open " + manifest.string());
  const std::filesystem::path root = manifest.parent_path();
  LabeledDataset out;
  std::string line;
  std::size_t lineno = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DatasetError(manifest.string() + ":" + std::to_string(lineno) + ": expected 'path,label'");
    }
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DatasetError(manifest.string() + ":" + std::to_string(lineno) + ": bad label");
    }
    if (label < 0) throw DatasetError(manifest.string() + ":" + std::to_string(lineno) + ": negative label");
    out.images.push_back(read_image(root / line.substr(0, comma)));
    out.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  out.num_classes = max_label + 1;
  if (out.empty()) throw DatasetError(manifest.string() + ": no entries");
  out.validate();
  return out;
}

LabeledDataset reduce_dataset(const LabeledDataset& d, std::size_t n, std::uint64_t seed) {
  if (n > d.size()) {
    throw DatasetError("cannot draw " + std::to_string(n) + " examples from " + std::to_string(d.size()));
  }
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  RngStream rng(seed, 0);
  // Partial Fisher-Yates: the first n slots are a uniform sample without replacement.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_int(d.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return d.subset(idx);
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d, double fraction,
                                                        std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ArgumentError("split fraction must be in [0, 1]");
  LabeledDataset shuffled = reduce_dataset(d, d.size(), seed);
  const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(d.size())));
  std::vector<std::size_t> first(k), second(d.size() - k);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), k);
  return {shuffled.subset(first), shuffled.subset(second)};
}

Invariances Invariances::parse(const std::string& text) {
  Invariances inv;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item == "none") continue;
    if (item == "invert") {
      inv.invert = true;
    } else if (item == "shear") {
      inv.shear = true;
    } else if (item == "rotate") {
      inv.rotate = true;
    } else {
      throw ArgumentError("unknown invariance '" + item + "' (expected invert, shear, rotate)");
    }
  }
  return inv;
}

std::string Invariances::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(invert, "invert");
  add(shear, "shear");
  add(rotate, "rotate");
  return out.empty() ? "none" : out;
}

namespace {

// Segments a..g of a seven-segment display, per digit.
constexpr std::array<std::uint8_t, 10> kDigitSegments = {
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111,
};

ImageBuffer render_glyph(int digit, RngStream& rng) {
  constexpr int kSize = 32;
  const int gw = 12 + static_cast<int>(rng.uniform_int(3));
  const int gh = 20 + static_cast<int>(rng.uniform_int(3));
  const int t = 2 + static_cast<int>(rng.uniform_int(2));
  const int x0 = (kSize - gw) / 2 - 1 + static_cast<int>(rng.uniform_int(3));
  const int y0 = (kSize - gh) / 2 - 1 + static_cast<int>(rng.uniform_int(3));
  std::array<int, 3> bg{}, fg{};
  const int bg_base = 10 + static_cast<int>(rng.uniform_int(61));
  const int fg_base = 170 + static_cast<int>(rng.uniform_int(76));
  for (int c = 0; c < 3; ++c) {
    bg[c] = bg_base + static_cast<int>(rng.uniform_int(21)) - 10;
    fg[c] = fg_base + static_cast<int>(rng.uniform_int(21)) - 10;
  }
  std::vector<std::uint8_t> mask(kSize * kSize, 0);
  auto fill = [&](int xa, int ya, int xb, int yb) {
    for (int y = std::max(ya, 0); y < std::min(yb, kSize); ++y) {
      for (int x = std::max(xa, 0); x < std::min(xb, kSize); ++x) mask[y * kSize + x] = 1;
    }
  };
  const int xm = x0 + gw;
  const int ymid = y0 + gh / 2;
  const int yb = y0 + gh;
  const std::uint8_t seg = kDigitSegments[static_cast<std::size_t>(digit)];
  if (seg & 0x01) fill(x0, y0, xm, y0 + t);                 // a
  if (seg & 0x02) fill(xm - t, y0, xm, ymid + 1);           // b
  if (seg & 0x04) fill(xm - t, ymid, xm, yb);               // c
  if (seg & 0x08) fill(x0, yb - t, xm, yb);                 // d
  if (seg & 0x10) fill(x0, ymid, x0 + t, yb);               // e
  if (seg & 0x20) fill(x0, y0, x0 + t, ymid + 1);           // f
  if (seg & 0x40) fill(x0, ymid - t / 2, xm, ymid - t / 2 + t);  // g
  ImageBuffer img(kSize, kSize);
  auto px = img.data();
  for (int i = 0; i < kSize * kSize; ++i) {
    for (int c = 0; c < 3; ++c) {
      const int noise = static_cast<int>(rng.uniform_int(9)) - 4;
      const int v = (mask[i] ? fg[c] : bg[c]) + noise;
      px[static_cast<std::size_t>(i) * 3 + c] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
  }
  return img;
}

LabeledDataset render_split(std::size_t n, int classes, std::uint64_t seed, std::uint64_t split,
                            const Invariances* inv) {
  LabeledDataset out;
  out.num_classes = classes;
  out.images.reserve(n);
  out.labels.reserve(n);
  const std::uint64_t split_seed = derive_seed(seed, split);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(split_seed, i);
    const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
    ImageBuffer img = render_glyph(label, rng);
    if (inv) {
      if (inv->shear && rng.bernoulli(0.5)) img = affine(img, AffineKind::shear_x, rng.uniform(-0.3, 0.3));
      if (inv->rotate && rng.bernoulli(0.5)) img = affine(img, AffineKind::rotate, rng.uniform(-30.0, 30.0));
      if (inv->invert && rng.bernoulli(0.5)) img = invert(img);
    }
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace

SynthSplits synth_invariance(const SynthOptions& opts, std::uint64_t seed) {
  if (opts.num_classes < 2 || opts.num_classes > 10) throw ArgumentError("synthetic classes must be in [2, 10]");
  if (opts.train + opts.val + opts.test < 100) throw ArgumentError("synthetic dataset needs at least 100 images");
  SynthSplits s;
  s.train = render_split(opts.train, opts.num_classes, seed, 1, nullptr);
  s.val = render_split(opts.val, opts.num_classes, seed, 2, &opts.invariances);
  s.test = render_split(opts.test, opts.num_classes, seed, 3, &opts.invariances);
  return s;
}

std::string ChannelStats::to_json() const {
  nlohmann::json j;
  j["mean"] = mean;
  j["std"] = stddev;
  j["degenerate_channels"] = degenerate_channels;
  return j.dump();
}

ChannelStats ChannelStats::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ChannelStats s;
    s.mean = j.at("mean").get<std::array<double, 3>>();
    s.stddev = j.at("std").get<std::array<double, 3>>();
    if (j.contains("degenerate_channels")) s.degenerate_channels = j["degenerate_channels"].get<std::vector<int>>();
    for (double sd : s.stddev) {
      if (!(sd > 0.0)) throw DatasetError("channel std must be positive");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("bad channel stats: ") + e.what());
  }
}

ChannelStats compute_channel_stats(const LabeledDataset& d) {
  if (d.empty()) throw DatasetError("cannot compute statistics of an empty dataset");
  std::array<double, 3> sum{}, sum2{};
  std::size_t count = 0;
  for (const ImageBuffer& img : d.images) {
    const auto px = img.data();
    for (std::size_t i = 0; i < px.size(); i += 3) {
      for (int c = 0; c < 3; ++c) {
        const double v = px[i + c];
        sum[c] += v;
        sum2[c] += v * v;
      }
    }
    count += img.pixel_count();
  }
  ChannelStats s;
  for (int c = 0; c < 3; ++c) {
    s.mean[c] = sum[c] / static_cast<double>(count);
    const double var = std::max(0.0, sum2[c] / static_cast<double>(count) - s.mean[c] * s.mean[c]);
    s.stddev[c] = std::sqrt(var);
    if (!(s.stddev[c] > 1e-12)) {
      s.stddev[c] = 1.0;
      s.degenerate_channels.push_back(c);
      std::cerr << "warning: channel " << c << " has zero variance; using std 1\n";
    }
  }
  return s;
}

void standardize_into(const ImageBuffer& img, const ChannelStats& stats, float* out) {
  std::array<float, 3> scale{}, shift{};
  for (int c = 0; c < 3; ++c) {
    scale[c] = static_cast<float>(1.0 / stats.stddev[c]);
    shift[c] = static_cast<float>(stats.mean[c] / stats.stddev[c]);
  }
  const auto px = img.data();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    for (int c = 0; c < 3; ++c) out[i + c] = static_cast<float>(px[i + c]) * scale[c] - shift[c];
  }
}

std::vector<float> standardize(const ImageBuffer& img, const ChannelStats& stats) {
  std::vector<float> out(img.bytes().size());
  standardize_into(img, stats, out.data());
  return out;
}

}  // namespace autoaug
