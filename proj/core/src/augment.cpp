#include "glomkit/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "glomkit/errors.hpp"

namespace glom {
namespace {

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double hi = std::max({r, g, b});
  const double lo = std::min({r, g, b});
  const double chroma = hi - lo;
  double h = 0.0;
  if (chroma > 0.0) {
    if (hi == r) {
      h = std::fmod((g - b) / chroma, 6.0);
    } else if (hi == g) {
      h = (b - r) / chroma + 2.0;
    } else {
      h = (r - g) / chroma + 4.0;
    }
    h /= 6.0;
    if (h < 0.0) h += 1.0;
  }
  const double s = hi > 0.0 ? chroma / hi : 0.0;
  return {h, s, hi};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

void require_rgb(const RgbImage& image) {
  require(image.r.same_shape(image.g) && image.r.same_shape(image.b),
          "RgbImage: channel shapes differ");
}

}  // namespace

PixelMap flip_horizontal(const PixelMap& image) {
  PixelMap out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) out(image.width() - 1 - x, y) = image(x, y);
  return out;
}

PixelMap flip_vertical(const PixelMap& image) {
  PixelMap out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) out(x, image.height() - 1 - y) = image(x, y);
  return out;
}

RgbImage flip_horizontal(const RgbImage& image) {
  return {flip_horizontal(image.r), flip_horizontal(image.g), flip_horizontal(image.b)};
}

RgbImage flip_vertical(const RgbImage& image) {
  return {flip_vertical(image.r), flip_vertical(image.g), flip_vertical(image.b)};
}

PixelMap adjust_brightness(const PixelMap& image, double delta) {
  PixelMap out = image;
  for (double& v : out.values()) v = std::clamp(v + delta, 0.0, 1.0);
  return out;
}

RgbImage adjust_brightness(const RgbImage& image, double delta) {
  return {adjust_brightness(image.r, delta), adjust_brightness(image.g, delta),
          adjust_brightness(image.b, delta)};
}

RgbImage shift_hue(const RgbImage& image, double delta) {
  require_rgb(image);
  RgbImage out = image;
  auto r = out.r.values();
  auto g = out.g.values();
  auto b = out.b.values();
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto [h, s, v] = rgb_to_hsv(r[i], g[i], b[i]);
    h = std::fmod(h + delta, 1.0);
    if (h < 0.0) h += 1.0;
    const auto rgb = hsv_to_rgb(h, s, v);
    r[i] = std::clamp(rgb[0], 0.0, 1.0);
    g[i] = std::clamp(rgb[1], 0.0, 1.0);
    b[i] = std::clamp(rgb[2], 0.0, 1.0);
  }
  return out;
}

namespace {

template <typename Image>
Image flips_and_brightness(Image image, std::mt19937_64& rng, const AugmentParams& params) {
  std::bernoulli_distribution flip(params.flip_probability);
  if (flip(rng)) image = flip_horizontal(image);
  if (flip(rng)) image = flip_vertical(image);
  if (params.max_brightness > 0.0) {
    std::uniform_real_distribution<double> delta(0.0, params.max_brightness);
    image = adjust_brightness(image, delta(rng));
  }
  return image;
}

}  // namespace

PixelMap augment(const PixelMap& image, std::mt19937_64& rng, const AugmentParams& params) {
  return flips_and_brightness(image, rng, params);
}

RgbImage augment(const RgbImage& image, std::mt19937_64& rng, const AugmentParams& params) {
  require_rgb(image);
  RgbImage out = image;
  if (params.max_hue_shift > 0.0) {
    std::uniform_real_distribution<double> delta(-params.max_hue_shift, params.max_hue_shift);
    out = shift_hue(out, delta(rng));
  }
  return flips_and_brightness(std::move(out), rng, params);
}

}  // namespace glom
