#include "glomkit/pixel_map.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "glomkit/errors.hpp"

namespace glom {

PixelMap::PixelMap(int width, int height, double fill)
    : width_(width), height_(height) {
  require(width >= 0 && height >= 0, "PixelMap: negative dimensions");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

PixelMap::PixelMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), data_(std::move(values)) {
  require(width >= 0 && height >= 0, "PixelMap: negative dimensions");
  require(data_.size() == static_cast<std::size_t>(width) * height,
          "PixelMap: value count does not match dimensions");
}

double PixelMap::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double PixelMap::min() const {
  require(!data_.empty(), "PixelMap::min on empty map");
  return *std::min_element(data_.begin(), data_.end());
}

double PixelMap::max() const {
  require(!data_.empty(), "PixelMap::max on empty map");
  return *std::max_element(data_.begin(), data_.end());
}

void require_same_shape(const PixelMap& a, const PixelMap& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": shape mismatch (" + std::to_string(a.width()) +
                          "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                          "x" + std::to_string(b.height()) + ")");
  }
}

}  // namespace glom
