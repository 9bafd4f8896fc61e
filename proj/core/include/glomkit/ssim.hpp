#pragma once

#include "glomkit/pixel_map.hpp"

namespace glom {

struct SsimParams {
  int window = 11;
  double c1 = 1e-4;  // (0.01 * L)^2 with dynamic range L = 1
  double c2 = 9e-4;  // (0.03 * L)^2
  int lambda_patches = 4;
  // Replace the sigma_a * sigma_b product with the covariance (standard SSIM).
  bool use_covariance = false;
  // One window spanning the whole input instead of sliding windows.
  bool global_moments = false;

  void validate() const;
};

struct SsimResult {
  double value = 0.0;
  PixelMap grad_a;  // d value / d a
};

/// Mean over all window positions of the structural similarity
///   (2 mu_a mu_b + c1)(2 s_a s_b + c2) / ((mu_a^2 + mu_b^2 + c1)(s_a^2 + s_b^2 + c2))
/// with uniform-window means and population standard deviations. Both maps
/// must be at least window x window.
double windowed_ssim(const PixelMap& a, const PixelMap& b, const SsimParams& params = {});

SsimResult windowed_ssim_with_grad(const PixelMap& a, const PixelMap& b,
                                   const SsimParams& params = {});

}  // namespace glom
