#include "glomkit/ssim.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "glomkit/errors.hpp"

namespace glom {
namespace {

// Below this variance a window counts as flat: sigma = 0 and the sigma
// product contributes no gradient.
constexpr double kFlatVariance = 1e-14;

// (w + 1) x (h + 1) summed-area table.
class Integral {
 public:
  Integral(int w, int h) : w_(w), h_(h), s_(static_cast<std::size_t>(w + 1) * (h + 1), 0.0) {}

  template <typename F>
  void build(F&& value) {
    for (int y = 0; y < h_; ++y) {
      double row = 0.0;
      for (int x = 0; x < w_; ++x) {
        row += value(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }

  // Sum over [x0, x1) x [y0, y1).
  double sum(int x0, int y0, int x1, int y1) const {
    return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
  }

 private:
  double& at(int x, int y) { return s_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }
  double at(int x, int y) const { return s_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }

  int w_;
  int h_;
  std::vector<double> s_;
};

struct WindowShape {
  int wx;
  int wy;
};

WindowShape window_shape(const PixelMap& a, const SsimParams& params) {
  if (params.global_moments) return {a.width(), a.height()};
  return {params.window, params.window};
}

double evaluate(const PixelMap& a, const PixelMap& b, const SsimParams& params, PixelMap* grad) {
  params.validate();
  require_same_shape(a, b, "windowed_ssim");
  const auto [wx, wy] = window_shape(a, params);
  require(a.width() >= wx && a.height() >= wy,
          "windowed_ssim: input " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
              " is smaller than the " + std::to_string(wx) + "x" + std::to_string(wy) +
              " window; pad first");

  const int w = a.width();
  const int h = a.height();
  const int nx = w - wx + 1;
  const int ny = h - wy + 1;
  const double n = static_cast<double>(wx) * wy;
  const double windows = static_cast<double>(nx) * ny;
  const bool cov_mode = params.use_covariance;

  Integral ia(w, h), ib(w, h), iaa(w, h), ibb(w, h), iab(w, h);
  ia.build([&](int x, int y) { return a(x, y); });
  ib.build([&](int x, int y) { return b(x, y); });
  iaa.build([&](int x, int y) { return a(x, y) * a(x, y); });
  ibb.build([&](int x, int y) { return b(x, y) * b(x, y); });
  if (cov_mode) iab.build([&](int x, int y) { return a(x, y) * b(x, y); });

  // Per-window derivative coefficients (only filled when a gradient is wanted).
  std::vector<double> coef_a, coef_b, coef_b_mu, coef_c, coef_c_mu;
  if (grad) {
    const std::size_t nw = static_cast<std::size_t>(nx) * ny;
    coef_a.assign(nw, 0.0);
    coef_b.assign(nw, 0.0);
    coef_b_mu.assign(nw, 0.0);
    if (cov_mode) {
      coef_c.assign(nw, 0.0);
      coef_c_mu.assign(nw, 0.0);
    }
  }

  double total = 0.0;
  for (int v = 0; v < ny; ++v) {
    for (int u = 0; u < nx; ++u) {
      const double mu_a = ia.sum(u, v, u + wx, v + wy) / n;
      const double mu_b = ib.sum(u, v, u + wx, v + wy) / n;
      const double var_a = std::max(iaa.sum(u, v, u + wx, v + wy) / n - mu_a * mu_a, 0.0);
      const double var_b = std::max(ibb.sum(u, v, u + wx, v + wy) / n - mu_b * mu_b, 0.0);
      const double sd_a = var_a > kFlatVariance ? std::sqrt(var_a) : 0.0;
      const double sd_b = var_b > kFlatVariance ? std::sqrt(var_b) : 0.0;

      const double lum_num = 2.0 * mu_a * mu_b + params.c1;
      const double lum_den = mu_a * mu_a + mu_b * mu_b + params.c1;
      const double lum = lum_num / lum_den;
      // sqrt(var_a * var_b) rather than sd_a * sd_b keeps ssim(a, a) exactly 1.
      double cross = sd_a > 0.0 && sd_b > 0.0 ? std::sqrt(var_a * var_b) : 0.0;
      if (cov_mode) cross = iab.sum(u, v, u + wx, v + wy) / n - mu_a * mu_b;
      const double con_num = 2.0 * cross + params.c2;
      const double con_den = var_a + var_b + params.c2;
      const double con = con_num / con_den;
      total += lum * con;

      if (!grad) continue;
      const std::size_t k = static_cast<std::size_t>(v) * nx + u;
      // d/d mu_a, applied with weight 1/n to every pixel of the window.
      coef_a[k] = con * (2.0 * mu_b * lum_den - lum_num * 2.0 * mu_a) / (lum_den * lum_den);
      // Coefficient of (a_i - mu_a)/n: variance in the denominator, plus the
      // sigma product (or covariance, handled below).
      double cb = lum * (-con_num / (con_den * con_den)) * 2.0;
      if (!cov_mode && sd_a > 0.0) cb += lum * (2.0 * sd_b / con_den) / sd_a;
      coef_b[k] = cb;
      coef_b_mu[k] = cb * mu_a;
      if (cov_mode) {
        // d cov / d a_i = (b_i - mu_b)/n
        coef_c[k] = lum * 2.0 / con_den;
        coef_c_mu[k] = coef_c[k] * mu_b;
      }
    }
  }

  if (grad) {
    *grad = PixelMap(w, h);
    auto grid_integral = [&](const std::vector<double>& c) {
      Integral g(nx, ny);
      g.build([&](int x, int y) { return c[static_cast<std::size_t>(y) * nx + x]; });
      return g;
    };
    const Integral sa = grid_integral(coef_a);
    const Integral sb = grid_integral(coef_b);
    const Integral sbm = grid_integral(coef_b_mu);
    std::optional<Integral> sc, scm;
    if (cov_mode) {
      sc = grid_integral(coef_c);
      scm = grid_integral(coef_c_mu);
    }
    const double scale = 1.0 / (windows * n);
    for (int y = 0; y < h; ++y) {
      const int v0 = std::max(0, y - wy + 1);
      const int v1 = std::min(y, ny - 1) + 1;
      for (int x = 0; x < w; ++x) {
        const int u0 = std::max(0, x - wx + 1);
        const int u1 = std::min(x, nx - 1) + 1;
        double g = sa.sum(u0, v0, u1, v1) + a(x, y) * sb.sum(u0, v0, u1, v1) - sbm.sum(u0, v0, u1, v1);
        if (cov_mode) g += b(x, y) * sc->sum(u0, v0, u1, v1) - scm->sum(u0, v0, u1, v1);
        (*grad)(x, y) = g * scale;
      }
    }
  }
  return total / windows;
}

}  // namespace

void SsimParams::validate() const {
  require(global_moments || (window >= 3 && window % 2 == 1), "SsimParams: window must be odd and >= 3");
  require(c1 > 0.0 && c2 > 0.0, "SsimParams: c1 and c2 must be positive");
  require(lambda_patches >= 1, "SsimParams: lambda_patches must be >= 1");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(lambda_patches))));
  require(side * side == lambda_patches, "SsimParams: lambda_patches must be a perfect square");
}

double windowed_ssim(const PixelMap& a, const PixelMap& b, const SsimParams& params) {
  return evaluate(a, b, params, nullptr);
}

SsimResult windowed_ssim_with_grad(const PixelMap& a, const PixelMap& b, const SsimParams& params) {
  SsimResult out;
  out.value = evaluate(a, b, params, &out.grad_a);
  return out;
}

}  // namespace glom
