#include "glomkit/pipeline.hpp"

#include <exception>
#include <map>
#include <tuple>

#include "glomkit/errors.hpp"
#include "glomkit/instances.hpp"

namespace glom {
namespace {

PixelMap crop(const PixelMap& map, const Box& box) {
  PixelMap out(box.width(), box.height());
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) out(x - box.x0, y - box.y0) = map(x, y);
  return out;
}

// Ground-truth label owning most pixels of segment `label` (0 when the
// segment lies on background).
int majority_instance(const InstanceSet& segments, int label, const InstanceSet& truth) {
  const Box& box = segments.boxes[label - 1];
  std::map<int, long> votes;
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x)
      if (segments.label(x, y) == label) ++votes[truth.label(x, y)];
  int best = 0;
  long best_votes = -1;
  for (const auto& [gt, n] : votes)
    if (n > best_votes) {
      best = gt;
      best_votes = n;
    }
  return best;
}

}  // namespace

std::vector<GroundTruthBox> slide_ground_truth(std::span<const SlideScene> slides) {
  std::vector<GroundTruthBox> out;
  for (const SlideScene& slide : slides) {
    const InstanceSet& inst = slide.scene.instances;
    for (int k = 0; k < inst.count(); ++k) out.push_back({slide.id, inst.boxes[k], slide.instance_classes[k]});
  }
  return out;
}

TwoStageResult run_two_stage(std::span<const SlideScene> slides, std::span<const PixelMap> seg_maps,
                             const Classifier& classifier, long min_area, double iou_threshold) {
  require(slides.size() == seg_maps.size(), "run_two_stage: one segmentation map per slide required");
  TwoStageResult result;
  result.ground_truth = slide_ground_truth(slides);
  EvalReport& report = result.report;

  long inter = 0, pred_area = 0, true_area = 0;
  for (std::size_t s = 0; s < slides.size(); ++s) {
    const SlideScene& slide = slides[s];
    const PixelMap& seg = seg_maps[s];
    require_same_shape(seg, slide.scene.mask, "run_two_stage");

    auto sv = seg.values();
    auto gv = slide.scene.mask.values();
    for (std::size_t i = 0; i < sv.size(); ++i) {
      const bool p = sv[i] >= 0.5;
      const bool g = gv[i] >= 0.5;
      inter += p && g;
      pred_area += p;
      true_area += g;
    }

    const InstanceSet segments = filter_tiny(connected_components(seg), min_area);
    for (int k = 1; k <= segments.count(); ++k) {
      ++report.n_segments;
      CropContext ctx;
      ctx.slide = &slide;
      ctx.box = segments.boxes[k - 1];
      ctx.image_crop = crop(slide.scene.image, ctx.box);
      ctx.matched_instance = majority_instance(segments, k, slide.scene.instances);
      const Lesion truth =
          ctx.matched_instance > 0 ? slide.instance_classes[ctx.matched_instance - 1] : Lesion::Neg;

      ClassifierOutput out;
      try {
        out = classifier(ctx);
      } catch (const std::exception&) {
        ++report.n_dropped;
        continue;
      }
      report.confusion.add(static_cast<int>(truth), static_cast<int>(out.label));
      if (out.label == Lesion::Neg) {
        ++report.n_negative;
        continue;
      }
      result.records.push_back({slide.id, ctx.box, out.label, out.confidence});
    }
  }

  report.dice = pred_area + true_area == 0 ? 1.0 : 2.0 * inter / static_cast<double>(pred_area + true_area);
  if (report.confusion.total() > 0) std::tie(report.acc_micro, report.acc_macro) = accuracy(report.confusion);
  const MapResult m = map50(result.records, result.ground_truth, kDetectionClasses, iou_threshold);
  report.map = m.map;
  report.ap_per_class = m.ap_per_class;
  return result;
}

Classifier oracle_classifier() {
  return [](const CropContext& ctx) {
    require(ctx.slide != nullptr, "oracle_classifier: missing slide");
    if (ctx.matched_instance == 0) return ClassifierOutput{Lesion::Neg, 1.0};
    return ClassifierOutput{ctx.slide->instance_classes[ctx.matched_instance - 1], 1.0};
  };
}

Classifier toy_classifier(const ModelParams& params) {
  return [params](const CropContext& ctx) {
    require(ctx.slide != nullptr, "toy_classifier: missing slide");
    const ToySample& sample = ctx.matched_instance > 0
                                  ? ctx.slide->instance_features[ctx.matched_instance - 1]
                                  : ctx.slide->background_features;
    const Prediction p = predict(sample, params);
    return ClassifierOutput{p.label, p.confidence};
  };
}

}  // namespace glom
