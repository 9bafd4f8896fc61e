#include "glomkit/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "glomkit/errors.hpp"

namespace glom {

std::vector<SweepRow> loss_sweep(std::span<const double> gtrs, std::span<const double> displacements,
                                 std::span<const LossId> losses, const SweepConfig& cfg) {
  require(!gtrs.empty() && !displacements.empty() && !losses.empty(), "loss_sweep: empty grid");
  for (double gtr : gtrs) require(gtr > 0.0 && gtr < 1.0, "loss_sweep: gtr must be in (0, 1)");
  for (double d : displacements) require(std::isfinite(d) && d >= 0.0, "loss_sweep: bad displacement");

  std::vector<SceneSpec> bases;
  std::vector<SceneSample> truths;
  for (double gtr : gtrs) {
    bases.push_back(single_disc_spec(cfg.width, cfg.height, gtr));
    truths.push_back(circle_scene(bases.back()));
  }

  // Grid points are independent; each writes its own slice of `rows`.
  const std::size_t n_points = gtrs.size() * displacements.size();
  std::vector<SweepRow> rows(n_points * losses.size());
  auto run_point = [&](std::size_t k) {
    const std::size_t gi = k / displacements.size();
    const double d = displacements[k % displacements.size()];
    const SceneSample& truth = truths[gi];
    const SceneSample shifted = displaced_scene(bases[gi], d, 0.0);
    const double iou = mask_iou(truth.mask, shifted.mask);
    for (std::size_t li = 0; li < losses.size(); ++li) {
      const LossResult r =
          evaluate_loss(losses[li], shifted.mask, truth.mask, truth.instances, cfg.losses);
      rows[k * losses.size() + li] = {losses[li], gtrs[gi], d, iou, r.value};
    }
  };

  const std::size_t n_threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, n_points);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < n_points; k = next++) {
      try {
        run_point(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out.precision(12);
  out << "loss_id,gtr,displacement,iou,value\n";
  for (const SweepRow& r : rows) {
    out << to_string(r.loss) << ',' << r.gtr << ',' << r.displacement << ',' << r.iou << ','
        << r.value << '\n';
  }
  return out.str();
}

}  // namespace glom
