#include "glomkit/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "glomkit/errors.hpp"

namespace glom {
namespace {

constexpr double kBackgroundLevel = 0.2;
constexpr double kForegroundLevel = 0.8;
constexpr double kImageNoise = 0.05;

struct Signatures {
  std::array<std::vector<double>, 2> parent;  // Neg, GS
  std::vector<double> common;                 // CSN common feature
  std::array<std::vector<double>, 3> child;   // C, SS, NoA
};

// Gaussian direction rescaled to unit RMS per channel.
std::vector<double> random_signature(int channels, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(channels);
  for (double& x : v) x = normal(rng);
  const double rms = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0) / channels);
  for (double& x : v) x /= rms;
  return v;
}

Signatures make_signatures(const DatasetConfig& cfg) {
  std::mt19937_64 rng(cfg.signature_seed);
  Signatures s;
  for (auto& p : s.parent) p = random_signature(cfg.channels, rng);
  s.common = random_signature(cfg.channels, rng);
  for (auto& c : s.child) c = random_signature(cfg.channels, rng);
  return s;
}

void add_scaled(std::vector<double>& features, int position, int channels,
                const std::vector<double>& signature, double scale) {
  for (int c = 0; c < channels; ++c) {
    features[static_cast<std::size_t>(position) * channels + c] += scale * signature[c];
  }
}

ToySample make_sample(const DatasetConfig& cfg, const Signatures& sig, Lesion lesion,
                      std::mt19937_64& rng) {
  ToySample s;
  s.parent = parent_of(lesion);
  s.child = child_of(lesion);
  s.features.assign(static_cast<std::size_t>(cfg.positions) * cfg.channels, 0.0);

  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  for (double& x : s.features) x = noise(rng);

  std::vector<int> order(cfg.positions);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::uniform_int_distribution<int> other_child(1, 2);
  for (int i = 0; i < cfg.active_positions; ++i) {
    const int pos = order[i];
    if (s.parent == ParentClass::CSN) {
      add_scaled(s.features, pos, cfg.channels, sig.common, cfg.common_strength);
      add_scaled(s.features, pos, cfg.channels, sig.child[static_cast<int>(*s.child)],
                 cfg.child_strength);
    } else {
      add_scaled(s.features, pos, cfg.channels, sig.parent[static_cast<int>(s.parent)],
                 cfg.parent_strength);
    }
  }
  for (int i = 0; i < cfg.distractor_positions; ++i) {
    const int pos = order[cfg.active_positions + i];
    // A child signature that is not the sample's own child class.
    const int own = s.child ? static_cast<int>(*s.child) : 0;
    const int decoy = s.child ? (own + other_child(rng)) % 3 : std::uniform_int_distribution<int>(0, 2)(rng);
    add_scaled(s.features, pos, cfg.channels, sig.child[decoy], cfg.distractor_strength);
  }
  return s;
}

}  // namespace

void SceneSpec::validate() const {
  require(width >= 16 && height >= 16, "SceneSpec: width and height must be >= 16");
  for (const Disc& d : objects) {
    require(std::isfinite(d.cx) && std::isfinite(d.cy) && std::isfinite(d.radius),
            "SceneSpec: non-finite disc");
    require(d.radius >= 1.0, "SceneSpec: radius must be >= 1");
    require(d.cx >= 0.0 && d.cx <= width && d.cy >= 0.0 && d.cy <= height,
            "SceneSpec: disc center outside the image");
  }
}

SizeClass size_class(double gtr) {
  if (gtr <= 0.20) return SizeClass::Small;
  if (gtr < 0.50) return SizeClass::Middle;
  return SizeClass::Large;
}

PixelMap rasterize_discs(int width, int height, const std::vector<Disc>& discs) {
  PixelMap mask(width, height);
  for (const Disc& d : discs) {
    const int x_lo = std::max(0, static_cast<int>(std::floor(d.cx - d.radius - 0.5)));
    const int x_hi = std::min(width - 1, static_cast<int>(std::ceil(d.cx + d.radius)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(d.cy - d.radius - 0.5)));
    const int y_hi = std::min(height - 1, static_cast<int>(std::ceil(d.cy + d.radius)));
    const double r2 = d.radius * d.radius;
    for (int y = y_lo; y <= y_hi; ++y) {
      const double dy = y + 0.5 - d.cy;
      for (int x = x_lo; x <= x_hi; ++x) {
        const double dx = x + 0.5 - d.cx;
        if (dx * dx + dy * dy <= r2) mask(x, y) = 1.0;
      }
    }
  }
  return mask;
}

namespace {

SceneSample render(int width, int height, const std::vector<Disc>& discs, std::uint64_t seed) {
  SceneSample out;
  out.mask = rasterize_discs(width, height, discs);
  out.instances = connected_components(out.mask);
  out.gtr = out.mask.sum() / (static_cast<double>(width) * height);
  out.image = PixelMap(width, height);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, kImageNoise);
  auto img = out.image.values();
  auto msk = out.mask.values();
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double base = msk[i] > 0.5 ? kForegroundLevel : kBackgroundLevel;
    img[i] = std::clamp(base + noise(rng), 0.0, 1.0);
  }
  return out;
}

}  // namespace

SceneSample circle_scene(const SceneSpec& spec) {
  spec.validate();
  return render(spec.width, spec.height, spec.objects, spec.seed);
}

SceneSample displaced_scene(const SceneSpec& base, double dx, double dy) {
  base.validate();
  require(std::isfinite(dx) && std::isfinite(dy), "displaced_scene: non-finite offset");
  std::vector<Disc> moved = base.objects;
  for (Disc& d : moved) {
    d.cx += dx;
    d.cy += dy;
  }
  return render(base.width, base.height, moved, base.seed);
}

double mask_iou(const PixelMap& a, const PixelMap& b, double threshold) {
  require_same_shape(a, b, "mask_iou");
  long inter = 0;
  long uni = 0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const bool in_a = av[i] >= threshold;
    const bool in_b = bv[i] >= threshold;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

SceneSpec single_disc_spec(int width, int height, double gtr) {
  require(gtr > 0.0 && gtr < 1.0, "single_disc_spec: gtr must be in (0, 1)");
  SceneSpec spec;
  spec.width = width;
  spec.height = height;
  const double radius = std::sqrt(gtr * width * height / std::numbers::pi);
  spec.objects.push_back({width / 2.0, height / 2.0, radius});
  return spec;
}

PixelMap normalize(const PixelMap& image) {
  require(!image.empty(), "normalize: empty image");
  const auto v = image.values();
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / n);
  PixelMap out(image.width(), image.height());
  if (sd == 0.0) return out;

  auto o = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) o[i] = (v[i] - mean) / sd;
  const auto [lo, hi] = std::minmax_element(o.begin(), o.end());
  const double zmin = *lo;
  const double range = *hi - zmin;
  if (range <= 0.0) return PixelMap(image.width(), image.height());
  for (double& x : o) x = (x - zmin) / range;
  return out;
}

// ---------------------------------------------------------------------------

void DatasetConfig::validate() const {
  for (int c : counts) require(c > 0, "DatasetConfig: every class count must be >= 1");
  require(positions >= 1 && channels >= 1, "DatasetConfig: positions and channels must be >= 1");
  require(active_positions >= 1 && active_positions + distractor_positions <= positions,
          "DatasetConfig: active + distractor positions exceed the position count");
  require(distractor_positions >= 0, "DatasetConfig: negative distractor count");
  require(noise_sigma >= 0.0, "DatasetConfig: negative noise");
}

DatasetConfig DatasetConfig::imbalanced(int total) {
  // NoA, SS, C, GS, Neg proportions of the reference training pool.
  constexpr double kNoA = 10401, kSS = 1066, kC = 818, kGS = 2223, kNeg = 8605;
  constexpr double kSum = kNoA + kSS + kC + kGS + kNeg;
  DatasetConfig cfg;
  auto scaled = [&](double n) { return std::max(1, static_cast<int>(std::lround(total * n / kSum))); };
  cfg.counts = {scaled(kNeg), scaled(kGS), scaled(kC), scaled(kSS), scaled(kNoA)};
  return cfg;
}

DatasetConfig DatasetConfig::balanced(int per_class) {
  DatasetConfig cfg;
  cfg.counts.fill(per_class);
  return cfg;
}

void ToyDataset::recount() {
  class_counts.clear();
  for (Lesion l : kAllLesions) class_counts[l] = 0;
  for (const ToySample& s : samples) ++class_counts[s.lesion()];
}

ToyDataset hierarchy_dataset(const DatasetConfig& cfg, std::uint64_t seed, double noise_rate) {
  cfg.validate();
  require(noise_rate >= 0.0 && noise_rate < 1.0, "hierarchy_dataset: noise_rate must be in [0, 1)");
  const Signatures sig = make_signatures(cfg);
  std::mt19937_64 rng(seed);

  ToyDataset ds;
  ds.positions = cfg.positions;
  ds.channels = cfg.channels;
  ds.noise_rate = noise_rate;
  for (Lesion lesion : kAllLesions) {
    for (int i = 0; i < cfg.counts[static_cast<int>(lesion)]; ++i) {
      ds.samples.push_back(make_sample(cfg, sig, lesion, rng));
    }
  }
  std::shuffle(ds.samples.begin(), ds.samples.end(), rng);

  std::bernoulli_distribution flip(noise_rate);
  std::uniform_int_distribution<int> shift(1, 2);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    ToySample& s = ds.samples[i];
    s.id = static_cast<int>(i);
    if (s.parent != ParentClass::CSN) continue;
    if (flip(rng)) {
      s.child = static_cast<ChildClass>((static_cast<int>(*s.child) + shift(rng)) % 3);
      s.is_mislabeled = true;
    }
  }

  for (ChildClass c : {ChildClass::C, ChildClass::SS, ChildClass::NoA}) {
    ToySample f = make_sample(cfg, sig, lesion_of(c), rng);
    f.id = static_cast<int>(ds.samples.size() + ds.fixed.size());
    f.is_fixed = true;
    ds.fixed.push_back(std::move(f));
  }
  ds.recount();
  return ds;
}

ToySample draw_toy_sample(const DatasetConfig& cfg, Lesion lesion, std::uint64_t seed, int id) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ToySample s = make_sample(cfg, make_signatures(cfg), lesion, rng);
  s.id = id;
  return s;
}

// ---------------------------------------------------------------------------

std::vector<SlideScene> synthetic_slides(int count, const SlideConfig& slide_cfg,
                                         const DatasetConfig& data_cfg, std::uint64_t seed) {
  require(count >= 0, "synthetic_slides: negative count");
  require(slide_cfg.min_objects >= 0 && slide_cfg.max_objects >= slide_cfg.min_objects,
          "synthetic_slides: bad object range");
  require(slide_cfg.min_radius >= 1.0 && slide_cfg.max_radius >= slide_cfg.min_radius,
          "synthetic_slides: bad radius range");
  std::mt19937_64 rng(seed);
  std::vector<SlideScene> slides;
  slides.reserve(count);
  int feature_id = 0;

  for (int s = 0; s < count; ++s) {
    SlideScene slide;
    slide.id = "slide_" + std::to_string(s);
    const int n = std::uniform_int_distribution<int>(slide_cfg.min_objects, slide_cfg.max_objects)(rng);
    std::uniform_real_distribution<double> radius_dist(slide_cfg.min_radius, slide_cfg.max_radius);
    std::vector<Lesion> disc_classes;
    for (int k = 0; k < n; ++k) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double r = radius_dist(rng);
        const double margin = r + 1.0;
        if (2 * margin >= slide_cfg.width || 2 * margin >= slide_cfg.height) break;
        std::uniform_real_distribution<double> cx(margin, slide_cfg.width - margin);
        std::uniform_real_distribution<double> cy(margin, slide_cfg.height - margin);
        const Disc d{cx(rng), cy(rng), r};
        const bool clear = std::all_of(slide.discs.begin(), slide.discs.end(), [&](const Disc& o) {
          return std::hypot(o.cx - d.cx, o.cy - d.cy) >= o.radius + d.radius + slide_cfg.min_gap;
        });
        if (!clear) continue;
        slide.discs.push_back(d);
        disc_classes.push_back(
            kDetectionClasses[std::uniform_int_distribution<std::size_t>(0, kDetectionClasses.size() - 1)(rng)]);
        break;
      }
    }

    SceneSpec spec;
    spec.width = slide_cfg.width;
    spec.height = slide_cfg.height;
    spec.objects = slide.discs;
    spec.seed = rng();
    slide.scene = circle_scene(spec);

    const int instances = slide.scene.instances.count();
    slide.instance_classes.assign(instances, Lesion::NoA);
    slide.instance_features.resize(instances);
    for (std::size_t k = 0; k < slide.discs.size(); ++k) {
      const Disc& d = slide.discs[k];
      const int label = slide.scene.instances.label(static_cast<int>(d.cx), static_cast<int>(d.cy));
      require(label > 0, "synthetic_slides: disc center not rasterized");
      slide.instance_classes[label - 1] = disc_classes[k];
    }
    for (int k = 0; k < instances; ++k) {
      slide.instance_features[k] = draw_toy_sample(data_cfg, slide.instance_classes[k], rng(), feature_id++);
    }
    slide.background_features = draw_toy_sample(data_cfg, Lesion::Neg, rng(), feature_id++);
    slides.push_back(std::move(slide));
  }
  return slides;
}

}  // namespace glom
