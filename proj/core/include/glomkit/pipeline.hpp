#pragma once

#include <functional>
#include <map>
#include <span>
#include <vector>

#include "glomkit/metrics.hpp"
#include "glomkit/synthgen.hpp"
#include "glomkit/uaan.hpp"

namespace glom {

/// What the classifier sees for one segmented object.
struct CropContext {
  const SlideScene* slide = nullptr;
  Box box;                   // minimum bounding box of the segment
  PixelMap image_crop;       // slide image cropped to `box`
  int matched_instance = 0;  // ground-truth label covering most of the segment, 0 if none
};

struct ClassifierOutput {
  Lesion label = Lesion::Neg;
  double confidence = 0.0;
};

/// May throw; a throwing crop is dropped and counted.
using Classifier = std::function<ClassifierOutput(const CropContext&)>;

struct EvalReport {
  double dice = 0.0;
  double acc_micro = 0.0;
  double acc_macro = 0.0;
  std::map<Lesion, double> ap_per_class;
  double map = 0.0;
  Confusion confusion{kNumLesions};
  int n_segments = 0;   // after the tiny-object filter
  int n_negative = 0;   // segments classified Neg (not reported as detections)
  int n_dropped = 0;    // classifier failures
};

struct TwoStageResult {
  std::vector<DetectionRecord> records;
  std::vector<GroundTruthBox> ground_truth;
  EvalReport report;
};

/// Stage 1 output (one probability map per slide) -> threshold -> connected
/// components -> tiny-object filter -> classify every surviving segment's
/// minimum bounding box -> detections scored against the slide ground truth.
TwoStageResult run_two_stage(std::span<const SlideScene> slides, std::span<const PixelMap> seg_maps,
                             const Classifier& classifier, long min_area = 100,
                             double iou_threshold = 0.5);

/// Ground-truth boxes of a slide set.
std::vector<GroundTruthBox> slide_ground_truth(std::span<const SlideScene> slides);

/// Returns the true class of the matched instance with confidence 1 (Neg for
/// unmatched segments).
Classifier oracle_classifier();

/// Feeds the matched instance's toy features (background features for
/// unmatched segments) to the trained model.
Classifier toy_classifier(const ModelParams& params);

}  // namespace glom
