#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glomkit/instances.hpp"
#include "glomkit/labels.hpp"
#include "glomkit/pixel_map.hpp"

namespace glom {

// ---------------------------------------------------------------------------
// Scenes

/// Disc in continuous pixel coordinates; pixel (x, y) has its center at
/// (x + 0.5, y + 0.5).
struct Disc {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
};

struct SceneSpec {
  int width = 128;
  int height = 128;
  std::vector<Disc> objects;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SceneSample {
  PixelMap image;  // noisy grayscale rendering in [0, 1]
  PixelMap mask;   // binary union of the discs
  InstanceSet instances;
  double gtr = 0.0;  // foreground pixels / all pixels
};

enum class SizeClass { Small, Middle, Large };

/// small: gtr <= 0.2, middle: 0.2 < gtr < 0.5, large: gtr >= 0.5
SizeClass size_class(double gtr);

/// Binary mask of the union of discs; a pixel is foreground when its center
/// lies inside (or on) any disc. Discs may extend past the frame.
PixelMap rasterize_discs(int width, int height, const std::vector<Disc>& discs);

SceneSample circle_scene(const SceneSpec& spec);

/// Same discs shifted by (dx, dy); parts leaving the frame are clipped.
SceneSample displaced_scene(const SceneSpec& base, double dx, double dy);

/// Intersection over union of two thresholded masks (1.0 when both empty).
double mask_iou(const PixelMap& a, const PixelMap& b, double threshold = 0.5);

/// Single centered disc whose area ratio approximates `gtr`.
SceneSpec single_disc_spec(int width, int height, double gtr);

/// Mean/std standardization followed by min-max rescaling to [0, 1].
/// A constant image maps to all zeros.
PixelMap normalize(const PixelMap& image);

// ---------------------------------------------------------------------------
// Hierarchical toy classification data

/// One toy "glomerulus": a positions x channels feature map.
struct ToySample {
  int id = 0;
  std::vector<double> features;  // row-major [position][channel]
  ParentClass parent = ParentClass::Neg;
  std::optional<ChildClass> child;
  bool is_fixed = false;
  bool is_mislabeled = false;  // generator truth, never visible to training

  Lesion lesion() const { return lesion_from(parent, child); }
};

struct DatasetConfig {
  // Regular-sample counts indexed by Lesion (Neg, GS, C, SS, NoA).
  std::array<int, kNumLesions> counts = {860, 222, 82, 107, 1040};
  int positions = 8;
  int channels = 16;
  int active_positions = 2;      // positions carrying the class signal
  int distractor_positions = 2;  // positions carrying a random child signature
  double parent_strength = 1.5;
  double common_strength = 1.5;  // CSN common feature, shared by C/SS/NoA
  double child_strength = 1.0;
  double distractor_strength = 1.0;
  double noise_sigma = 0.5;
  // Class signatures depend only on this seed so that datasets drawn with
  // different sample seeds share the same class structure.
  std::uint64_t signature_seed = 20220817;

  void validate() const;

  /// Counts proportional to NoA:SS:C:GS:Neg = 10401:1066:818:2223:8605,
  /// scaled to roughly `total` samples (every class at least 1).
  static DatasetConfig imbalanced(int total);
  static DatasetConfig balanced(int per_class);
};

struct ToyDataset {
  int positions = 0;
  int channels = 0;
  std::vector<ToySample> samples;  // regular training pool
  std::vector<ToySample> fixed;    // exactly one per child class when generated
  std::map<Lesion, int> class_counts;
  double noise_rate = 0.0;

  /// Recomputes class_counts from samples (by possibly-noisy label).
  void recount();
};

/// Features: class signature (+ CSN common feature and child signature for
/// CSN samples) at `active_positions` random positions, random child
/// signatures at distractor positions, plus Gaussian noise. With probability
/// `noise_rate` a CSN sample's child label is flipped to another child class.
ToyDataset hierarchy_dataset(const DatasetConfig& cfg, std::uint64_t seed, double noise_rate);

/// Draws one sample of `lesion` from the same generative model.
ToySample draw_toy_sample(const DatasetConfig& cfg, Lesion lesion, std::uint64_t seed, int id);

// ---------------------------------------------------------------------------
// Synthetic slides for the two-stage pipeline

struct SlideScene {
  std::string id;
  SceneSample scene;
  std::vector<Disc> discs;
  std::vector<Lesion> instance_classes;      // per instance label (label k -> [k-1])
  std::vector<ToySample> instance_features;  // per instance toy appearance
  ToySample background_features;             // appearance of non-glomerulus tissue
};

struct SlideConfig {
  int width = 128;
  int height = 128;
  int min_objects = 2;
  int max_objects = 5;
  double min_radius = 7.0;
  double max_radius = 14.0;
  int min_gap = 3;  // pixels between discs, keeps instances separable
};

/// Scenes of non-touching discs, each labelled with a detection class
/// (NoA, SS, GS or C).
std::vector<SlideScene> synthetic_slides(int count, const SlideConfig& slide_cfg,
                                         const DatasetConfig& data_cfg, std::uint64_t seed);

}  // namespace glom
