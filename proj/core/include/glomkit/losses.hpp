#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "glomkit/instances.hpp"
#include "glomkit/pixel_map.hpp"
#include "glomkit/ssim.hpp"
#include "glomkit/synthgen.hpp"

namespace glom {

/// Loss value and its gradient with respect to the prediction p.
struct LossResult {
  double value = 0.0;
  PixelMap gradient;
};

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

struct LossConfig {
  double dice_smooth = 1.0;
  FocalParams focal;
  SsimParams ssim;
  double alpha = 1.0;  // focal weight inside FISS
  double beta = 1.0;   // ISS weight inside FISS
  double tversky_alpha = 0.7;
  double tversky_beta = 0.3;
  double tversky_smooth = 1.0;
};

/// 1 - (2 sum(pg) + smooth) / (sum(p) + sum(g) + smooth)
LossResult dice_loss(const PixelMap& p, const PixelMap& g, double smooth = 1.0);

/// Pixel mean of -alpha_t (1 - p_t)^gamma log(p_t); p clamped to [1e-7, 1 - 1e-7].
LossResult focal_loss(const PixelMap& p, const PixelMap& g, const FocalParams& params = {});

/// 1 - TP / (TP + alpha FP + beta FN + smooth), soft counts.
LossResult tversky_loss(const PixelMap& p, const PixelMap& g, double alpha, double beta,
                        double smooth = 1.0);

/// 1 - windowed_ssim over the whole image (the plain SSIM loss).
LossResult ssim_loss(const PixelMap& p, const PixelMap& g, const SsimParams& params = {});

/// Instance-level similarity terms. Exactly one is set: iss_p when the ground
/// truth has instances (mean SSIM over zero-padded box crops), otherwise iss_n
/// (minimum SSIM over the lambda equal patches of the image).
struct IssComponents {
  std::optional<double> iss_p;
  std::optional<double> iss_n;
};

IssComponents iss_components(const PixelMap& p, const PixelMap& g, const InstanceSet& instances,
                             const SsimParams& params = {});

/// 1 - iss_p for images with instances, 1 - iss_n for background-only images.
/// The loss of a batch is the mean of its per-image losses.
LossResult iss_loss(const PixelMap& p, const PixelMap& g, const InstanceSet& instances,
                    const SsimParams& params = {});

/// alpha * focal + beta * iss
LossResult fiss_loss(const PixelMap& p, const PixelMap& g, const InstanceSet& instances,
                     const LossConfig& cfg = {});

/// dice + fiss
LossResult compound_dl_fiss(const PixelMap& p, const PixelMap& g, const InstanceSet& instances,
                            const LossConfig& cfg = {});

enum class LossId { Dice, Focal, Tversky, Ssim, Iss, Fiss, Compound };

inline constexpr LossId kAllLossIds[] = {LossId::Dice, LossId::Focal, LossId::Tversky,
                                         LossId::Ssim, LossId::Iss,   LossId::Fiss,
                                         LossId::Compound};

std::string_view to_string(LossId id);
LossId parse_loss_id(std::string_view name);  // throws ValidationError

LossResult evaluate_loss(LossId id, const PixelMap& p, const PixelMap& g,
                         const InstanceSet& instances, const LossConfig& cfg = {});

/// Central differences at `n_coords` random pixels against the analytic
/// gradient. Returns max |a - fd| / max(|a|, |fd|, 1e-8).
double fd_gradient_check(LossId id, const PixelMap& p, const PixelMap& g,
                         const InstanceSet& instances, const LossConfig& cfg = {},
                         double h = 1e-5, int n_coords = 100, std::uint64_t seed = 0);

/// Soft Dice 2 sum(pg) / (sum(p) + sum(g)), 1.0 when both sums are zero.
double soft_dice(const PixelMap& p, const PixelMap& g);

struct FitResult {
  PixelMap prediction;
  std::vector<double> dice_trace;  // soft Dice after every step
};

/// Fits a free per-pixel logit map to the scene mask by gradient descent on
/// sigmoid(logits). Logits start at 0. The step is lr * (pixel count) * dL/dz,
/// so lr is a per-pixel rate independent of image size. Throws NumericalError
/// when the loss becomes non-finite.
FitResult direct_fit(const SceneSample& scene, LossId loss, int steps, double learning_rate,
                     const LossConfig& cfg = {});

}  // namespace glom
