#include "glomkit/instances.hpp"

#include <algorithm>
#include <numeric>

#include "glomkit/errors.hpp"

namespace glom {
namespace {

class DisjointSets {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Keeps the smaller id as root so roots follow raster order.
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

long InstanceSet::total_area() const { return std::accumulate(areas.begin(), areas.end(), 0L); }

PixelMap InstanceSet::mask() const {
  PixelMap out(width, height);
  auto values = out.values();
  for (std::size_t i = 0; i < label_map.size(); ++i) values[i] = label_map[i] > 0 ? 1.0 : 0.0;
  return out;
}

InstanceSet connected_components(const PixelMap& mask, double threshold,
                                 Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  InstanceSet out;
  out.width = w;
  out.height = h;
  out.label_map.assign(static_cast<std::size_t>(w) * h, 0);

  // First pass: provisional ids (1-based in the map, 0-based in the forest).
  DisjointSets sets;
  std::vector<int> provisional(out.label_map.size(), -1);
  auto at = [&](int x, int y) -> int& { return provisional[static_cast<std::size_t>(y) * w + x]; };
  const bool eight = connectivity == Connectivity::Eight;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(x, y) < threshold) continue;
      int current = -1;
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w) return;
        const int id = at(nx, ny);
        if (id < 0) return;
        if (current < 0) {
          current = id;
        } else {
          sets.unite(current, id);
        }
      };
      visit(x - 1, y);
      visit(x, y - 1);
      if (eight) {
        visit(x - 1, y - 1);
        visit(x + 1, y - 1);
      }
      at(x, y) = current >= 0 ? current : sets.make();
    }
  }

  // Second pass: final labels in raster order of each component's first pixel.
  std::vector<int> final_label;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = at(x, y);
      if (id < 0) continue;
      const int root = sets.find(id);
      if (static_cast<std::size_t>(root) >= final_label.size()) final_label.resize(root + 1, 0);
      int& label = final_label[root];
      if (label == 0) {
        out.boxes.push_back({x, y, x, y});
        out.areas.push_back(0);
        label = out.count();
      }
      out.label_map[static_cast<std::size_t>(y) * w + x] = label;
      Box& box = out.boxes[label - 1];
      box.x0 = std::min(box.x0, x);
      box.x1 = std::max(box.x1, x);
      box.y0 = std::min(box.y0, y);
      box.y1 = std::max(box.y1, y);
      ++out.areas[label - 1];
    }
  }
  return out;
}

PaddedCrop crop_padded_with_offset(const PixelMap& map, const Box& box, int min_size) {
  require(box.area() > 0, "crop_padded: degenerate box");
  require(box.x0 >= 0 && box.y0 >= 0 && box.x1 < map.width() && box.y1 < map.height(),
          "crop_padded: box outside the map");
  require(min_size >= 0, "crop_padded: negative min_size");
  const int cw = box.width();
  const int ch = box.height();
  const int ow = std::max(cw, min_size);
  const int oh = std::max(ch, min_size);
  PaddedCrop out{PixelMap(ow, oh), (ow - cw) / 2, (oh - ch) / 2};
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      out.map(x + out.offset_x, y + out.offset_y) = map(box.x0 + x, box.y0 + y);
    }
  }
  return out;
}

PixelMap crop_padded(const PixelMap& map, const Box& box, int min_size) {
  return crop_padded_with_offset(map, box, min_size).map;
}

InstanceSet filter_tiny(const InstanceSet& instances, long min_area) {
  InstanceSet out;
  out.width = instances.width;
  out.height = instances.height;
  std::vector<int> relabel(instances.count() + 1, 0);
  for (int k = 0; k < instances.count(); ++k) {
    if (instances.areas[k] < min_area) continue;
    out.boxes.push_back(instances.boxes[k]);
    out.areas.push_back(instances.areas[k]);
    relabel[k + 1] = out.count();
  }
  out.label_map.resize(instances.label_map.size());
  std::transform(instances.label_map.begin(), instances.label_map.end(), out.label_map.begin(),
                 [&](int label) { return relabel[label]; });
  return out;
}

}  // namespace glom
