#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace glom {

/// Row-major 2-D grid of doubles. Used for probability maps, binary masks,
/// grayscale images and per-pixel gradients.
class PixelMap {
 public:
  PixelMap() = default;
  PixelMap(int width, int height, double fill = 0.0);
  PixelMap(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int x, int y) { return data_[index(x, y)]; }
  double operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const PixelMap& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  double sum() const;
  double min() const;
  double max() const;

  friend bool operator==(const PixelMap&, const PixelMap&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Axis-aligned box with inclusive pixel bounds.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  long area() const {
    return (x1 < x0 || y1 < y0) ? 0L : static_cast<long>(width()) * height();
  }
  bool contains(int x, int y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

void require_same_shape(const PixelMap& a, const PixelMap& b, const char* what);

}  // namespace glom
