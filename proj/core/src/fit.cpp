#include <cmath>
#include <string>

#include "glomkit/errors.hpp"
#include "glomkit/losses.hpp"

namespace glom {

FitResult direct_fit(const SceneSample& scene, LossId loss, int steps, double learning_rate,
                     const LossConfig& cfg) {
  require(steps >= 0, "direct_fit: negative step count");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "direct_fit: bad learning rate");
  const PixelMap& target = scene.mask;
  const int w = target.width();
  const int h = target.height();
  const double pixels = static_cast<double>(w) * h;

  PixelMap logits(w, h, 0.0);
  FitResult out{PixelMap(w, h, 0.5), {}};
  out.dice_trace.reserve(steps);

  for (int step = 0; step < steps; ++step) {
    const LossResult r = evaluate_loss(loss, out.prediction, target, scene.instances, cfg);
    if (!std::isfinite(r.value)) {
      throw NumericalError("direct_fit: non-finite " + std::string(to_string(loss)) +
                           " loss at step " + std::to_string(step));
    }
    auto z = logits.values();
    auto p = out.prediction.values();
    auto grad = r.gradient.values();
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double dz = grad[i] * p[i] * (1.0 - p[i]);
      if (!std::isfinite(dz)) {
        throw NumericalError("direct_fit: non-finite gradient at step " + std::to_string(step));
      }
      z[i] -= learning_rate * pixels * dz;
      p[i] = 1.0 / (1.0 + std::exp(-z[i]));
    }
    out.dice_trace.push_back(soft_dice(out.prediction, target));
  }
  return out;
}

}  // namespace glom
