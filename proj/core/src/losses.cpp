#include "glomkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "glomkit/errors.hpp"

namespace glom {
namespace {

constexpr double kFocalClamp = 1e-7;

struct SimilarityWithGrad {
  double value = 0.0;
  PixelMap grad;  // d value / d p over the full image
};

int padding_size(const SsimParams& params) { return params.global_moments ? 1 : params.window; }

// Windowed SSIM of the crops of p and g at `box`, zero-padded up to the
// window size, with the gradient accumulated into `grad` at `weight`.
double crop_similarity(const PixelMap& p, const PixelMap& g, const Box& box,
                       const SsimParams& params, PixelMap* grad, double weight) {
  const PaddedCrop cp = crop_padded_with_offset(p, box, padding_size(params));
  const PixelMap cg = crop_padded(g, box, padding_size(params));
  if (!grad) return windowed_ssim(cp.map, cg, params);
  const SsimResult r = windowed_ssim_with_grad(cp.map, cg, params);
  for (int y = 0; y < box.height(); ++y) {
    for (int x = 0; x < box.width(); ++x) {
      (*grad)(box.x0 + x, box.y0 + y) += weight * r.grad_a(x + cp.offset_x, y + cp.offset_y);
    }
  }
  return r.value;
}

SimilarityWithGrad instance_similarity(const PixelMap& p, const PixelMap& g,
                                       const InstanceSet& instances, const SsimParams& params,
                                       bool want_grad) {
  SimilarityWithGrad out;
  out.grad = PixelMap(p.width(), p.height());
  const double weight = 1.0 / instances.count();
  double sum = 0.0;
  for (const Box& box : instances.boxes) {
    sum += crop_similarity(p, g, box, params, want_grad ? &out.grad : nullptr, weight);
  }
  out.value = sum * weight;
  return out;
}

std::vector<Box> patch_grid(int width, int height, int lambda) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(lambda))));
  require(width >= side && height >= side, "iss: image smaller than the patch grid");
  std::vector<Box> boxes;
  for (int py = 0; py < side; ++py) {
    for (int px = 0; px < side; ++px) {
      boxes.push_back({px * width / side, py * height / side, (px + 1) * width / side - 1,
                       (py + 1) * height / side - 1});
    }
  }
  return boxes;
}

SimilarityWithGrad background_similarity(const PixelMap& p, const PixelMap& g,
                                         const SsimParams& params, bool want_grad) {
  SimilarityWithGrad out;
  out.grad = PixelMap(p.width(), p.height());
  const std::vector<Box> patches = patch_grid(p.width(), p.height(), params.lambda_patches);
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const double v = crop_similarity(p, g, patches[i], params, nullptr, 1.0);
    if (i == 0 || v < best_value) {
      best = i;
      best_value = v;
    }
  }
  out.value = best_value;
  if (want_grad) crop_similarity(p, g, patches[best], params, &out.grad, 1.0);
  return out;
}

void check_instances(const PixelMap& g, const InstanceSet& instances) {
  require(instances.width == g.width() && instances.height == g.height(),
          "iss: instance set does not match the ground-truth shape");
}

LossResult negate_similarity(SimilarityWithGrad s) {
  LossResult out{1.0 - s.value, std::move(s.grad)};
  for (double& v : out.gradient.values()) v = -v;
  return out;
}

void accumulate(LossResult& into, const LossResult& term, double weight) {
  into.value += weight * term.value;
  auto dst = into.gradient.values();
  auto src = term.gradient.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * src[i];
}

}  // namespace

LossResult dice_loss(const PixelMap& p, const PixelMap& g, double smooth) {
  require_same_shape(p, g, "dice_loss");
  require(smooth >= 0.0, "dice_loss: negative smoothing");
  auto pv = p.values();
  auto gv = g.values();
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    inter += pv[i] * gv[i];
    sp += pv[i];
    sg += gv[i];
  }
  const double num = 2.0 * inter + smooth;
  const double den = sp + sg + smooth;
  LossResult out{0.0, PixelMap(p.width(), p.height())};
  if (den <= 0.0) return out;  // both empty with smooth 0: perfect agreement
  out.value = 1.0 - num / den;
  auto grad = out.gradient.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    grad[i] = -(2.0 * gv[i] * den - num) / (den * den);
  }
  return out;
}

LossResult focal_loss(const PixelMap& p, const PixelMap& g, const FocalParams& params) {
  require_same_shape(p, g, "focal_loss");
  const double gamma = params.gamma;
  auto pv = p.values();
  auto gv = g.values();
  const double n = static_cast<double>(pv.size());
  LossResult out{0.0, PixelMap(p.width(), p.height())};
  auto grad = out.gradient.values();
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double q = std::clamp(pv[i], kFocalClamp, 1.0 - kFocalClamp);
    const bool clamped = q != pv[i];
    const bool positive = gv[i] >= 0.5;
    const double pt = positive ? q : 1.0 - q;
    const double at = positive ? params.alpha : 1.0 - params.alpha;
    const double mod = std::pow(1.0 - pt, gamma);
    total += -at * mod * std::log(pt);
    if (clamped) continue;
    // d/dpt of -at (1 - pt)^gamma log(pt)
    const double dmod = gamma == 0.0 ? 0.0 : -gamma * std::pow(1.0 - pt, gamma - 1.0);
    const double dpt = -at * (dmod * std::log(pt) + mod / pt);
    grad[i] = (positive ? dpt : -dpt) / n;
  }
  out.value = total / n;
  return out;
}

LossResult tversky_loss(const PixelMap& p, const PixelMap& g, double alpha, double beta,
                        double smooth) {
  require_same_shape(p, g, "tversky_loss");
  require(alpha >= 0.0 && beta >= 0.0 && smooth >= 0.0, "tversky_loss: negative parameter");
  auto pv = p.values();
  auto gv = g.values();
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    tp += pv[i] * gv[i];
    fp += pv[i] * (1.0 - gv[i]);
    fn += (1.0 - pv[i]) * gv[i];
  }
  const double den = tp + alpha * fp + beta * fn + smooth;
  LossResult out{0.0, PixelMap(p.width(), p.height())};
  if (den <= 0.0) return out;
  out.value = 1.0 - tp / den;
  auto grad = out.gradient.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double dtp = gv[i];
    const double dden = gv[i] + alpha * (1.0 - gv[i]) - beta * gv[i];
    grad[i] = -(dtp * den - tp * dden) / (den * den);
  }
  return out;
}

LossResult ssim_loss(const PixelMap& p, const PixelMap& g, const SsimParams& params) {
  SsimResult r = windowed_ssim_with_grad(p, g, params);
  return negate_similarity({r.value, std::move(r.grad_a)});
}

IssComponents iss_components(const PixelMap& p, const PixelMap& g, const InstanceSet& instances,
                             const SsimParams& params) {
  require_same_shape(p, g, "iss_components");
  check_instances(g, instances);
  params.validate();
  IssComponents out;
  if (instances.count() > 0) {
    out.iss_p = instance_similarity(p, g, instances, params, false).value;
  } else {
    out.iss_n = background_similarity(p, g, params, false).value;
  }
  return out;
}

LossResult iss_loss(const PixelMap& p, const PixelMap& g, const InstanceSet& instances,
                    const SsimParams& params) {
  require_same_shape(p, g, "iss_loss");
  check_instances(g, instances);
  params.validate();
  if (instances.count() > 0) return negate_similarity(instance_similarity(p, g, instances, params, true));
  return negate_similarity(background_similarity(p, g, params, true));
}

LossResult fiss_loss(const PixelMap& p, const PixelMap& g, const InstanceSet& instances,
                     const LossConfig& cfg) {
  LossResult out{0.0, PixelMap(p.width(), p.height())};
  if (cfg.alpha != 0.0) accumulate(out, focal_loss(p, g, cfg.focal), cfg.alpha);
  if (cfg.beta != 0.0) accumulate(out, iss_loss(p, g, instances, cfg.ssim), cfg.beta);
  return out;
}

LossResult compound_dl_fiss(const PixelMap& p, const PixelMap& g, const InstanceSet& instances,
                            const LossConfig& cfg) {
  LossResult out = dice_loss(p, g, cfg.dice_smooth);
  accumulate(out, fiss_loss(p, g, instances, cfg), 1.0);
  return out;
}

std::string_view to_string(LossId id) {
  switch (id) {
    case LossId::Dice: return "dice";
    case LossId::Focal: return "focal";
    case LossId::Tversky: return "tversky";
    case LossId::Ssim: return "ssim";
    case LossId::Iss: return "iss";
    case LossId::Fiss: return "fiss";
    case LossId::Compound: return "compound";
  }
  return "?";
}

LossId parse_loss_id(std::string_view name) {
  for (LossId id : kAllLossIds) {
    if (to_string(id) == name) return id;
  }
  throw ValidationError("unknown loss '" + std::string(name) +
                        "' (expected dice, focal, tversky, ssim, iss, fiss or compound)");
}

LossResult evaluate_loss(LossId id, const PixelMap& p, const PixelMap& g,
                         const InstanceSet& instances, const LossConfig& cfg) {
  switch (id) {
    case LossId::Dice: return dice_loss(p, g, cfg.dice_smooth);
    case LossId::Focal: return focal_loss(p, g, cfg.focal);
    case LossId::Tversky:
      return tversky_loss(p, g, cfg.tversky_alpha, cfg.tversky_beta, cfg.tversky_smooth);
    case LossId::Ssim: return ssim_loss(p, g, cfg.ssim);
    case LossId::Iss: return iss_loss(p, g, instances, cfg.ssim);
    case LossId::Fiss: return fiss_loss(p, g, instances, cfg);
    case LossId::Compound: return compound_dl_fiss(p, g, instances, cfg);
  }
  throw ValidationError("evaluate_loss: unknown loss id");
}

double fd_gradient_check(LossId id, const PixelMap& p, const PixelMap& g,
                         const InstanceSet& instances, const LossConfig& cfg, double h,
                         int n_coords, std::uint64_t seed) {
  require(h > 0.0 && n_coords >= 1, "fd_gradient_check: bad step or coordinate count");
  const LossResult analytic = evaluate_loss(id, p, g, instances, cfg);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> px(0, p.width() - 1);
  std::uniform_int_distribution<int> py(0, p.height() - 1);
  PixelMap probe = p;
  double worst = 0.0;
  for (int k = 0; k < n_coords; ++k) {
    const int x = px(rng);
    const int y = py(rng);
    const double original = probe(x, y);
    probe(x, y) = original + h;
    const double up = evaluate_loss(id, probe, g, instances, cfg).value;
    probe(x, y) = original - h;
    const double down = evaluate_loss(id, probe, g, instances, cfg).value;
    probe(x, y) = original;
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic.gradient(x, y);
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

double soft_dice(const PixelMap& p, const PixelMap& g) {
  require_same_shape(p, g, "soft_dice");
  auto pv = p.values();
  auto gv = g.values();
  double inter = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    inter += pv[i] * gv[i];
    sum += pv[i] + gv[i];
  }
  return sum == 0.0 ? 1.0 : 2.0 * inter / sum;
}

}  // namespace glom
