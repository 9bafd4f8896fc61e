#pragma once

#include <random>

#include "glomkit/pixel_map.hpp"

namespace glom {

struct RgbImage {
  PixelMap r;
  PixelMap g;
  PixelMap b;

  int width() const { return r.width(); }
  int height() const { return r.height(); }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct AugmentParams {
  double max_hue_shift = 0.15;   // delta ~ U[-max, max], fraction of a full turn
  double flip_probability = 0.5;  // per axis
  double max_brightness = 0.15;   // delta ~ U(0, max), added to every channel
};

PixelMap flip_horizontal(const PixelMap& image);
PixelMap flip_vertical(const PixelMap& image);
RgbImage flip_horizontal(const RgbImage& image);
RgbImage flip_vertical(const RgbImage& image);

/// Adds delta and clips to [0, 1].
PixelMap adjust_brightness(const PixelMap& image, double delta);
RgbImage adjust_brightness(const RgbImage& image, double delta);

/// Rotates the HSV hue by delta * 360 degrees; output clipped to [0, 1].
RgbImage shift_hue(const RgbImage& image, double delta);

PixelMap augment(const PixelMap& image, std::mt19937_64& rng, const AugmentParams& params);
RgbImage augment(const RgbImage& image, std::mt19937_64& rng, const AugmentParams& params);

}  // namespace glom
