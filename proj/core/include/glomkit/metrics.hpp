#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glomkit/labels.hpp"
#include "glomkit/pixel_map.hpp"

namespace glom {

/// 2|P & G| / (|P| + |G|) on thresholded maps; 1.0 when both are empty.
double dice_score(const PixelMap& p, const PixelMap& g, double threshold = 0.5);

/// Intersection over union on inclusive pixel bounds.
double box_iou(const Box& a, const Box& b);

/// Square confusion matrix, counts[truth][pred].
class Confusion {
 public:
  explicit Confusion(int classes = 0) : classes_(classes), counts_(std::size_t(classes) * classes) {}

  int classes() const { return classes_; }
  long& at(int truth, int pred) { return counts_[std::size_t(truth) * classes_ + pred]; }
  long at(int truth, int pred) const { return counts_[std::size_t(truth) * classes_ + pred]; }
  void add(int truth, int pred) { ++at(truth, pred); }
  long total() const;
  bool is_diagonal() const;

 private:
  int classes_;
  std::vector<long> counts_;
};

/// (micro, macro). Macro skips classes without samples. Throws on an empty
/// matrix.
std::pair<double, double> accuracy(const Confusion& confusion);

struct DetectionRecord {
  std::string scene_id;
  Box box;
  Lesion cls = Lesion::NoA;
  double confidence = 0.0;
};

struct GroundTruthBox {
  std::string scene_id;
  Box box;
  Lesion cls = Lesion::NoA;
};

/// All-points interpolated AP of one class. Predictions are taken in
/// descending confidence (ties keep input order) and greedily matched to the
/// highest-IoU unmatched ground truth of the same scene. Returns nullopt when
/// the class has no ground truth.
std::optional<double> average_precision(std::span<const DetectionRecord> preds,
                                        std::span<const GroundTruthBox> gts, Lesion cls,
                                        double iou_threshold = 0.5);

struct MapResult {
  double map = 0.0;
  std::map<Lesion, double> ap_per_class;
};

/// Mean AP over `classes` that have ground truth.
MapResult map50(std::span<const DetectionRecord> preds, std::span<const GroundTruthBox> gts,
                std::span<const Lesion> classes, double iou_threshold = 0.5);

enum class RankSumMode { Auto, Exact, Normal };

/// Two-sided Mann-Whitney U test. Auto uses exact enumeration when the pooled
/// size is <= 12, otherwise the tie-corrected normal approximation with
/// continuity correction. Each sample needs at least 3 values.
double rank_sum_test(std::span<const double> a, std::span<const double> b,
                     RankSumMode mode = RankSumMode::Auto);

/// Mann-Whitney U of sample a (midranks for ties).
double mann_whitney_u(std::span<const double> a, std::span<const double> b);

}  // namespace glom
