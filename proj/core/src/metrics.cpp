#include "glomkit/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "glomkit/errors.hpp"

namespace glom {

double dice_score(const PixelMap& p, const PixelMap& g, double threshold) {
  require_same_shape(p, g, "dice_score");
  long inter = 0, sp = 0, sg = 0;
  auto pv = p.values();
  auto gv = g.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const bool a = pv[i] >= threshold;
    const bool b = gv[i] >= threshold;
    inter += a && b;
    sp += a;
    sg += b;
  }
  if (sp + sg == 0) return 1.0;
  return 2.0 * inter / static_cast<double>(sp + sg);
}

double box_iou(const Box& a, const Box& b) {
  const Box inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  const long i = inter.area();
  const long u = a.area() + b.area() - i;
  return u > 0 ? static_cast<double>(i) / u : 0.0;
}

long Confusion::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0L); }

bool Confusion::is_diagonal() const {
  for (int t = 0; t < classes_; ++t)
    for (int p = 0; p < classes_; ++p)
      if (t != p && at(t, p) != 0) return false;
  return true;
}

std::pair<double, double> accuracy(const Confusion& confusion) {
  const long total = confusion.total();
  require(confusion.classes() > 0 && total > 0, "accuracy: empty confusion matrix");
  long correct = 0;
  double recall_sum = 0.0;
  int present = 0;
  for (int t = 0; t < confusion.classes(); ++t) {
    long row = 0;
    for (int p = 0; p < confusion.classes(); ++p) row += confusion.at(t, p);
    correct += confusion.at(t, t);
    if (row == 0) continue;
    recall_sum += static_cast<double>(confusion.at(t, t)) / row;
    ++present;
  }
  return {static_cast<double>(correct) / total, recall_sum / present};
}

std::optional<double> average_precision(std::span<const DetectionRecord> preds,
                                        std::span<const GroundTruthBox> gts, Lesion cls,
                                        double iou_threshold) {
  std::vector<const GroundTruthBox*> truth;
  for (const GroundTruthBox& g : gts)
    if (g.cls == cls) truth.push_back(&g);
  if (truth.empty()) return std::nullopt;

  std::vector<const DetectionRecord*> ranked;
  for (const DetectionRecord& p : preds)
    if (p.cls == cls) ranked.push_back(&p);
  std::stable_sort(ranked.begin(), ranked.end(), [](const DetectionRecord* a, const DetectionRecord* b) {
    return a->confidence > b->confidence;
  });

  std::vector<bool> matched(truth.size(), false);
  std::vector<double> precision, recall;
  long tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const DetectionRecord& p = *ranked[k];
    double best_iou = -1.0;
    std::size_t best = truth.size();
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (matched[t] || truth[t]->scene_id != p.scene_id) continue;
      const double iou = box_iou(p.box, truth[t]->box);
      if (iou > best_iou) {
        best_iou = iou;
        best = t;
      }
    }
    if (best < truth.size() && best_iou >= iou_threshold) {
      matched[best] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / (k + 1));
    recall.push_back(static_cast<double>(tp) / truth.size());
  }

  // Precision envelope from the right, then area under the step curve.
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

MapResult map50(std::span<const DetectionRecord> preds, std::span<const GroundTruthBox> gts,
                std::span<const Lesion> classes, double iou_threshold) {
  MapResult out;
  for (Lesion cls : classes) {
    if (auto ap = average_precision(preds, gts, cls, iou_threshold)) out.ap_per_class[cls] = *ap;
  }
  if (!out.ap_per_class.empty()) {
    double sum = 0.0;
    for (const auto& [cls, ap] : out.ap_per_class) sum += ap;
    out.map = sum / out.ap_per_class.size();
  }
  return out;
}

}  // namespace glom
