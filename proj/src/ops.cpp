#include "autoaug/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <string>

#include "autoaug/errors.hpp"

namespace autoaug {
namespace {

using Lut = std::array<std::uint8_t, 256>;

ImageBuffer apply_lut(const ImageBuffer& img, const Lut& lut) {
  ImageBuffer out = img;
  for (std::uint8_t& v : out.data()) v = lut[v];
  return out;
}

ImageBuffer apply_channel_luts(const ImageBuffer& img, const std::array<Lut, 3>& luts) {
  ImageBuffer out = img;
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); i += 3) {
    data[i] = luts[0][data[i]];
    data[i + 1] = luts[1][data[i + 1]];
    data[i + 2] = luts[2][data[i + 2]];
  }
  return out;
}

using Histogram = std::array<std::uint32_t, 256>;

std::array<Histogram, 3> channel_histograms(const ImageBuffer& img) {
  std::array<Histogram, 3> h{};
  auto data = img.data();
  for (std::size_t i = 0; i < data.size(); i += 3) {
    ++h[0][data[i]];
    ++h[1][data[i + 1]];
    ++h[2][data[i + 2]];
  }
  return h;
}

Lut identity_lut() {
  Lut lut{};
  for (int i = 0; i < 256; ++i) lut[i] = static_cast<std::uint8_t>(i);
  return lut;
}

// ITU-R 601-2 luma in 16.16 fixed point with rounding.
inline std::uint8_t luma(const std::uint8_t* rgb) {
  return static_cast<std::uint8_t>(
      (rgb[0] * 19595u + rgb[1] * 38470u + rgb[2] * 7471u + 0x8000u) >> 16);
}

// Float32 blend with truncation, clamped when extrapolating.
ImageBuffer blend(const ImageBuffer& from, const ImageBuffer& to, double factor) {
  const float alpha = static_cast<float>(factor);
  if (alpha == 0.0f) return from;
  if (alpha == 1.0f) return to;
  ImageBuffer out = from;
  auto src = to.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const int a = dst[i];
    const int b = src[i];
    const float t = static_cast<float>(a) + alpha * static_cast<float>(b - a);
    if (t <= 0.0f) {
      dst[i] = 0;
    } else if (t >= 255.0f) {
      dst[i] = 255;
    } else {
      dst[i] = static_cast<std::uint8_t>(t);
    }
  }
  return out;
}

inline std::uint8_t clip8_truncate(float v) {
  if (v <= 0.0f) return 0;
  if (v >= 255.0f) return 255;
  return static_cast<std::uint8_t>(v);
}

// 3x3 SMOOTH filter ([1 1 1; 1 5 1; 1 1 1] / 13), borders copied.
ImageBuffer smooth3x3(const ImageBuffer& img) {
  const int w = img.width();
  const int h = img.height();
  ImageBuffer out = img;
  if (w < 3 || h < 3) return out;
  const float edge = static_cast<float>(1.0 / 13.0);
  const float centre = static_cast<float>(5.0 / 13.0);
  const float k[9] = {edge, edge, edge, edge, centre, edge, edge, edge, edge};
  for (int y = 1; y < h - 1; ++y) {
    const std::uint8_t* above = img.row(y - 1);
    const std::uint8_t* mid = img.row(y);
    const std::uint8_t* below = img.row(y + 1);
    std::uint8_t* dst = out.row(y);
    for (int x = 1; x < w - 1; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int i = x * 3 + c;
        auto row_sum = [i](const std::uint8_t* r, const float* kk) {
          return static_cast<float>(r[i - 3]) * kk[0] + static_cast<float>(r[i]) * kk[1] +
                 static_cast<float>(r[i + 3]) * kk[2];
        };
        float ss = 0.5f;
        ss += row_sum(below, &k[0]);
        ss += row_sum(mid, &k[3]);
        ss += row_sum(above, &k[6]);
        dst[i] = clip8_truncate(ss);
      }
    }
  }
  return out;
}

// Python float semantics used by the reference rotate.
double py_mod(double a, double b) {
  double m = std::fmod(a, b);
  if (m != 0.0) {
    if ((b < 0) != (m < 0)) m += b;
  } else {
    m = std::copysign(0.0, b);
  }
  return m;
}

double py_round(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return std::strtod(buf, nullptr);
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ArgumentError(std::string(what) + ": value must be finite");
}

inline int coord(double v) { return v < 0.0 ? -1 : static_cast<int>(v); }

inline void copy_pixel(std::uint8_t* dst, const std::uint8_t* src) {
  dst[0] = src[0];
  dst[1] = src[1];
  dst[2] = src[2];
}

// Axis-aligned case: a[1] == a[3] == 0.
void scale_affine(const ImageBuffer& in, ImageBuffer& out, const std::array<double, 6>& a) {
  const int w = out.width();
  const int h = out.height();
  std::vector<int> xin_tab(static_cast<std::size_t>(w), 0);
  int xmin = w;
  int xmax = 0;
  double xo = a[2] + a[0] * 0.5;
  for (int x = 0; x < w; ++x) {
    const int xin = coord(xo);
    if (xin >= 0 && xin < in.width()) {
      xmax = x + 1;
      if (x < xmin) xmin = x;
      xin_tab[x] = xin;
    }
    xo += a[0];
  }
  double yo = a[5] + a[4] * 0.5;
  for (int y = 0; y < h; ++y) {
    const int yi = coord(yo);
    if (yi >= 0 && yi < in.height()) {
      for (int x = xmin; x < xmax; ++x) copy_pixel(out.pixel(x, y), in.pixel(xin_tab[x], yi));
    }
    yo += a[4];
  }
}

bool fits_fixed(const std::array<double, 6>& a, int x, int y) {
  return std::fabs(x * a[0] + y * a[1] + a[2]) < 32768.0 &&
         std::fabs(x * a[3] + y * a[4] + a[5]) < 32768.0;
}

int to_fixed(double v) {
  const double s = v * 65536.0 + 0.5;
  return s < 0.0 ? static_cast<int>(std::floor(s)) : static_cast<int>(s);
}

// 16.16 fixed-point stepping.
void fixed_affine(const ImageBuffer& in, ImageBuffer& out, const std::array<double, 6>& a) {
  const int a0 = to_fixed(a[0]);
  const int a1 = to_fixed(a[1]);
  const int a3 = to_fixed(a[3]);
  const int a4 = to_fixed(a[4]);
  int a2 = to_fixed(a[2] + a[1] * 0.5 + a[0] * 0.5);
  int a5 = to_fixed(a[5] + a[4] * 0.5 + a[3] * 0.5);
  for (int y = 0; y < out.height(); ++y) {
    int xx = a2;
    int yy = a5;
    for (int x = 0; x < out.width(); ++x) {
      const int xin = xx >> 16;
      if (xin >= 0 && xin < in.width()) {
        const int yin = yy >> 16;
        if (yin >= 0 && yin < in.height()) copy_pixel(out.pixel(x, y), in.pixel(xin, yin));
      }
      xx += a0;
      yy += a3;
    }
    a2 += a1;
    a5 += a4;
  }
}

void float_affine(const ImageBuffer& in, ImageBuffer& out, const std::array<double, 6>& a) {
  double xo = a[2] + a[1] * 0.5 + a[0] * 0.5;
  double yo = a[5] + a[4] * 0.5 + a[3] * 0.5;
  for (int y = 0; y < out.height(); ++y) {
    double xx = xo;
    double yy = yo;
    for (int x = 0; x < out.width(); ++x) {
      const int xin = coord(xx);
      if (xin >= 0 && xin < in.width()) {
        const int yin = coord(yy);
        if (yin >= 0 && yin < in.height()) copy_pixel(out.pixel(x, y), in.pixel(xin, yin));
      }
      xx += a[0];
      yy += a[3];
    }
    xo += a[1];
    yo += a[4];
  }
}

enum class QuarterTurn { ccw90, half, ccw270 };

ImageBuffer transpose(const ImageBuffer& img, QuarterTurn turn) {
  const int w = img.width();
  const int h = img.height();
  const bool swap = turn != QuarterTurn::half;
  ImageBuffer out(swap ? h : w, swap ? w : h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int ox = 0;
      int oy = 0;
      switch (turn) {
        case QuarterTurn::ccw90: ox = y; oy = w - 1 - x; break;
        case QuarterTurn::half: ox = w - 1 - x; oy = h - 1 - y; break;
        case QuarterTurn::ccw270: ox = h - 1 - y; oy = x; break;
      }
      copy_pixel(out.pixel(ox, oy), img.pixel(x, y));
    }
  }
  return out;
}

ImageBuffer rotate(const ImageBuffer& img, double degrees, std::uint8_t fill) {
  const double angle = py_mod(degrees, 360.0);
  const int w = img.width();
  const int h = img.height();
  if (angle == 0.0) return img;
  if (angle == 180.0) return transpose(img, QuarterTurn::half);
  if ((angle == 90.0 || angle == 270.0) && w == h) {
    return transpose(img, angle == 90.0 ? QuarterTurn::ccw90 : QuarterTurn::ccw270);
  }
  const double cx = w / 2.0;
  const double cy = h / 2.0;
  constexpr double kDegToRad = std::numbers::pi / 180.0;
  const double rad = -(angle * kDegToRad);
  std::array<double, 6> m = {py_round(std::cos(rad), 15), py_round(std::sin(rad), 15), 0.0,
                             py_round(-std::sin(rad), 15), py_round(std::cos(rad), 15), 0.0};
  const double tx = m[0] * -cx + m[1] * -cy + m[2];
  const double ty = m[3] * -cx + m[4] * -cy + m[5];
  m[2] = tx + cx;
  m[5] = ty + cy;
  return affine_transform(img, m, fill);
}

}  // namespace

ImageBuffer invert(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (std::uint8_t& v : out.data()) v = static_cast<std::uint8_t>(255 - v);
  return out;
}

ImageBuffer solarize(const ImageBuffer& img, int threshold) {
  if (threshold < 0 || threshold > 256) {
    throw ArgumentError("solarize: threshold must be in [0, 256], got " + std::to_string(threshold));
  }
  Lut lut{};
  for (int i = 0; i < 256; ++i) lut[i] = static_cast<std::uint8_t>(i < threshold ? i : 255 - i);
  return apply_lut(img, lut);
}

ImageBuffer posterize(const ImageBuffer& img, int bits) {
  if (bits < 1 || bits > 8) {
    throw ArgumentError("posterize: bits must be in [1, 8], got " + std::to_string(bits));
  }
  const int mask = ~((1 << (8 - bits)) - 1);
  Lut lut{};
  for (int i = 0; i < 256; ++i) lut[i] = static_cast<std::uint8_t>(i & mask);
  return apply_lut(img, lut);
}

ImageBuffer equalize(const ImageBuffer& img) {
  const auto hist = channel_histograms(img);
  std::array<Lut, 3> luts;
  for (int c = 0; c < 3; ++c) {
    const Histogram& h = hist[c];
    luts[c] = identity_lut();
    std::uint64_t total = 0;
    std::uint64_t last = 0;
    int nonzero = 0;
    for (int i = 0; i < 256; ++i) {
      if (h[i]) {
        total += h[i];
        last = h[i];
        ++nonzero;
      }
    }
    if (nonzero <= 1) continue;
    const std::uint64_t step = (total - last) / 255;
    if (step == 0) continue;
    std::uint64_t n = step / 2;
    for (int i = 0; i < 256; ++i) {
      luts[c][i] = static_cast<std::uint8_t>(std::min<std::uint64_t>(n / step, 255));
      n += h[i];
    }
  }
  return apply_channel_luts(img, luts);
}

ImageBuffer autocontrast(const ImageBuffer& img) {
  const auto hist = channel_histograms(img);
  std::array<Lut, 3> luts;
  for (int c = 0; c < 3; ++c) {
    const Histogram& h = hist[c];
    luts[c] = identity_lut();
    int lo = 0;
    while (lo < 255 && !h[lo]) ++lo;
    int hi = 255;
    while (hi > 0 && !h[hi]) --hi;
    if (hi <= lo) continue;
    const double scale = 255.0 / (hi - lo);
    const double offset = -lo * scale;
    for (int i = 0; i < 256; ++i) {
      const int v = static_cast<int>(i * scale + offset);
      luts[c][i] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
  }
  return apply_channel_luts(img, luts);
}

ImageBuffer enhance_degenerate(const ImageBuffer& img, EnhanceKind kind) {
  switch (kind) {
    case EnhanceKind::brightness:
      return ImageBuffer(img.width(), img.height(), 0);
    case EnhanceKind::color: {
      ImageBuffer out = img;
      auto d = out.data();
      for (std::size_t i = 0; i < d.size(); i += 3) {
        const std::uint8_t l = luma(&d[i]);
        d[i] = d[i + 1] = d[i + 2] = l;
      }
      return out;
    }
    case EnhanceKind::contrast: {
      std::uint64_t sum = 0;
      auto d = img.data();
      for (std::size_t i = 0; i < d.size(); i += 3) sum += luma(&d[i]);
      const double mean = static_cast<double>(sum) / static_cast<double>(img.pixel_count());
      return ImageBuffer(img.width(), img.height(), static_cast<std::uint8_t>(static_cast<int>(mean + 0.5)));
    }
    case EnhanceKind::sharpness:
      return smooth3x3(img);
  }
  throw ArgumentError("enhance: unknown kind");
}

ImageBuffer enhance(const ImageBuffer& img, EnhanceKind kind, double factor) {
  if (!std::isfinite(factor) || factor < 0.0) {
    throw ArgumentError("enhance: factor must be finite and >= 0, got " + std::to_string(factor));
  }
  return blend(enhance_degenerate(img, kind), img, factor);
}

ImageBuffer affine_transform(const ImageBuffer& img, const std::array<double, 6>& a,
                             std::uint8_t fill) {
  for (double v : a) check_finite(v, "affine");
  ImageBuffer out(img.width(), img.height(), fill);
  if (a[1] == 0.0 && a[3] == 0.0) {
    scale_affine(img, out, a);
    return out;
  }
  const int w = out.width();
  const int h = out.height();
  if (fits_fixed(a, 0, 0) && fits_fixed(a, w, h) && fits_fixed(a, 0, h) && fits_fixed(a, w, 0)) {
    fixed_affine(img, out, a);
  } else {
    float_affine(img, out, a);
  }
  return out;
}

ImageBuffer affine(const ImageBuffer& img, AffineKind kind, double v, std::uint8_t fill) {
  check_finite(v, "affine");
  switch (kind) {
    case AffineKind::shear_x: return affine_transform(img, {1, v, 0, 0, 1, 0}, fill);
    case AffineKind::shear_y: return affine_transform(img, {1, 0, 0, v, 1, 0}, fill);
    case AffineKind::translate_x: return affine_transform(img, {1, 0, v, 0, 1, 0}, fill);
    case AffineKind::translate_y: return affine_transform(img, {1, 0, 0, 0, 1, v}, fill);
    case AffineKind::rotate: return rotate(img, v, fill);
  }
  throw ArgumentError("affine: unknown kind");
}

PatchRect cutout_region(int width, int height, int size, RngStream& rng) {
  const int cx = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(width)));
  const int cy = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(height)));
  const int x0 = cx - size / 2;
  const int y0 = cy - size / 2;
  return PatchRect{std::max(0, x0), std::max(0, y0), std::min(width, x0 + size),
                   std::min(height, y0 + size)};
}

ImageBuffer cutout(const ImageBuffer& img, int size, RngStream& rng) {
  if (size < 0) throw ArgumentError("cutout: size must be >= 0");
  if (size == 0) return img;
  const PatchRect r = cutout_region(img.width(), img.height(), size, rng);
  ImageBuffer out = img;
  for (int y = r.y0; y < r.y1; ++y) {
    std::fill(out.pixel(r.x0, y), out.pixel(r.x0, y) + (r.x1 - r.x0) * 3, kDefaultFill);
  }
  return out;
}

ImageBuffer sample_pair(const ImageBuffer& img, const ImageBuffer& partner, double weight) {
  if (!img.same_shape(partner)) throw ArgumentError("sample_pair: image dimensions differ");
  if (!(weight >= 0.0 && weight <= 1.0)) throw ArgumentError("sample_pair: weight must be in [0, 1]");
  ImageBuffer out = img;
  auto dst = out.data();
  auto src = partner.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double v = (1.0 - weight) * dst[i] + weight * src[i];
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

ImageBuffer mirror_horizontal(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      copy_pixel(out.pixel(x, y), img.pixel(img.width() - 1 - x, y));
    }
  }
  return out;
}

ImageBuffer flip_pad_crop(const ImageBuffer& img, RngStream& rng, int pad) {
  if (pad < 0) throw ArgumentError("flip_pad_crop: pad must be >= 0");
  const bool flip = rng.uniform() < 0.5;
  const ImageBuffer src = flip ? mirror_horizontal(img) : img;
  const auto span = static_cast<std::uint64_t>(2 * pad + 1);
  const int ox = static_cast<int>(rng.uniform_int(span)) - pad;
  const int oy = static_cast<int>(rng.uniform_int(span)) - pad;
  ImageBuffer out(img.width(), img.height(), 0);
  for (int y = 0; y < img.height(); ++y) {
    const int sy = y + oy;
    if (sy < 0 || sy >= img.height()) continue;
    for (int x = 0; x < img.width(); ++x) {
      const int sx = x + ox;
      if (sx >= 0 && sx < img.width()) copy_pixel(out.pixel(x, y), src.pixel(sx, sy));
    }
  }
  return out;
}

}  // namespace autoaug
