#pragma once

#include <vector>

#include "glomkit/pixel_map.hpp"

namespace glom {

enum class Connectivity { Four, Eight };

/// Connected components of a thresholded mask.
///
/// Labels are contiguous 1..count(), assigned in raster-scan order of each
/// component's first pixel; 0 is background. boxes[k] and areas[k] describe
/// label k + 1.
struct InstanceSet {
  int width = 0;
  int height = 0;
  std::vector<int> label_map;
  std::vector<Box> boxes;
  std::vector<long> areas;

  int count() const { return static_cast<int>(boxes.size()); }
  int label(int x, int y) const { return label_map[static_cast<std::size_t>(y) * width + x]; }
  long total_area() const;

  /// Binary mask of all instance pixels.
  PixelMap mask() const;

  friend bool operator==(const InstanceSet&, const InstanceSet&) = default;
};

InstanceSet connected_components(const PixelMap& mask, double threshold = 0.5,
                                 Connectivity connectivity = Connectivity::Eight);

/// Crop of `box`; sides shorter than `min_size` are zero-padded symmetrically
/// (the extra pixel of an odd pad goes to the right/bottom).
PixelMap crop_padded(const PixelMap& map, const Box& box, int min_size);

/// Placement of a padded crop inside its output map.
struct PaddedCrop {
  PixelMap map;
  int offset_x = 0;
  int offset_y = 0;
};

PaddedCrop crop_padded_with_offset(const PixelMap& map, const Box& box, int min_size);

/// Drops instances with area < min_area and relabels the survivors
/// contiguously, preserving their relative order.
InstanceSet filter_tiny(const InstanceSet& instances, long min_area = 100);

}  // namespace glom
