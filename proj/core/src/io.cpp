#include "glomkit/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "glomkit/errors.hpp"

namespace glom::io {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "probability maps assume a little-endian host");

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  require(out.good(), "cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  require(in.good(), "cannot open: " + path.string());
  return in;
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

// Wraps nlohmann type/key errors as validation errors.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

void write_pgm(const fs::path& path, const PixelMap& map, bool as_mask) {
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << map.width() << ' ' << map.height() << "\n255\n";
  for (double v : map.values()) {
    const int level = as_mask ? (v >= 0.5 ? 255 : 0) : static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    out.put(static_cast<char>(level));
  }
}

json box_json(const Box& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

Box box_from(const json& j) {
  require(j.is_array() && j.size() == 4, "box must be [x0, y0, x1, y1]");
  Box b{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  require(b.x1 >= b.x0 && b.y1 >= b.y0, "box must satisfy x1 >= x0 and y1 >= y0");
  return b;
}

json sample_json(const ToySample& s) {
  json j{{"id", s.id},
         {"parent", std::string(to_string(s.parent))},
         {"features", s.features},
         {"is_fixed", s.is_fixed},
         {"is_mislabeled", s.is_mislabeled}};
  j["child"] = s.child ? json(std::string(to_string(*s.child))) : json(nullptr);
  return j;
}

ToySample sample_from(const json& j) {
  ToySample s;
  s.id = j.at("id").get<int>();
  s.parent = parse_parent(j.at("parent").get<std::string>());
  s.features = j.at("features").get<std::vector<double>>();
  s.is_fixed = j.value("is_fixed", false);
  s.is_mislabeled = j.value("is_mislabeled", false);
  if (j.contains("child") && !j["child"].is_null()) s.child = parse_child(j["child"].get<std::string>());
  require((s.parent == ParentClass::CSN) == s.child.has_value(), "sample child label must be present exactly for CSN");
  return s;
}

json layer_json(const DenseLayer& l) {
  return json{{"in", l.in_dim}, {"out", l.out_dim}, {"weight", l.weight}, {"bias", l.bias}};
}

void layer_from(const json& j, DenseLayer& l) {
  require(j.at("in").get<int>() == l.in_dim && j.at("out").get<int>() == l.out_dim, "layer shape mismatch");
  l.weight = j.at("weight").get<std::vector<double>>();
  l.bias = j.at("bias").get<std::vector<double>>();
  require(l.weight.size() == std::size_t(l.in_dim) * l.out_dim && l.bias.size() == std::size_t(l.out_dim),
          "layer size mismatch");
}

constexpr std::array<const char*, kNumLayers> kLayerNames = {"backbone", "parent_transform", "parent_head",
                                                             "child_transform", "child_head"};

json lesion_map_json(const std::map<Lesion, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[std::string(to_string(k))] = v;
  return j;
}

}  // namespace

void write_pgm_mask(const fs::path& path, const PixelMap& mask) { write_pgm(path, mask, true); }
void write_pgm_image(const fs::path& path, const PixelMap& image) { write_pgm(path, image, false); }

void write_ppm_image(const fs::path& path, const RgbImage& image) {
  auto out = open_out(path, std::ios::binary);
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  auto level = [](double v) { return static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      out.put(level(image.r(x, y)));
      out.put(level(image.g(x, y)));
      out.put(level(image.b(x, y)));
    }
}

PixelMap read_pgm(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  require(in.good() && magic == "P5" && w > 0 && h > 0 && maxval > 0 && maxval < 256,
          "not an 8-bit binary PGM: " + path.string());
  in.get();
  std::vector<unsigned char> bytes(std::size_t(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(in.gcount() == static_cast<std::streamsize>(bytes.size()), "truncated PGM: " + path.string());
  std::vector<double> values(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) values[i] = bytes[i] / static_cast<double>(maxval);
  return PixelMap(w, h, std::move(values));
}

void write_probability_map(const fs::path& path, const PixelMap& map) {
  auto out = open_out(path, std::ios::binary);
  auto v = map.values();
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  fs::path sidecar = path;
  sidecar += ".json";
  write_text(sidecar, json{{"width", map.width()}, {"height", map.height()}}.dump() + "\n");
}

PixelMap read_probability_map(const fs::path& path) {
  fs::path sidecar = path;
  sidecar += ".json";
  const json meta = parse(read_text(sidecar), "probability map sidecar");
  const auto [w, h] = guarded("probability map sidecar", [&] {
    return std::pair{meta.at("width").get<int>(), meta.at("height").get<int>()};
  });
  require(w > 0 && h > 0, "probability map sidecar: non-positive size");
  auto in = open_in(path, std::ios::binary);
  std::vector<double> values(std::size_t(w) * h);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  require(in.gcount() == static_cast<std::streamsize>(values.size() * sizeof(double)),
          "probability map size does not match its sidecar: " + path.string());
  for (double v : values) require(std::isfinite(v), "probability map contains non-finite values");
  return PixelMap(w, h, std::move(values));
}

std::string instances_to_json(const InstanceSet& instances) {
  json list = json::array();
  for (int k = 0; k < instances.count(); ++k)
    list.push_back({{"label", k + 1}, {"box", box_json(instances.boxes[k])}, {"area", instances.areas[k]}});
  return json{{"width", instances.width}, {"height", instances.height}, {"instances", list}}.dump(2);
}

std::string scene_to_json(const SceneSpec& spec, const SceneSample& sample) {
  json discs = json::array();
  for (const Disc& d : spec.objects) discs.push_back({{"cx", d.cx}, {"cy", d.cy}, {"radius", d.radius}});
  json inst = json::array();
  for (int k = 0; k < sample.instances.count(); ++k)
    inst.push_back({{"label", k + 1}, {"box", box_json(sample.instances.boxes[k])}, {"area", sample.instances.areas[k]}});
  return json{{"width", spec.width}, {"height", spec.height}, {"seed", spec.seed},
              {"objects", discs},    {"gtr", sample.gtr},     {"instances", inst}}
      .dump(2);
}

SceneSpec scene_spec_from_json(const std::string& text) {
  const json j = parse(text, "scene spec");
  SceneSpec spec = guarded("scene spec", [&] {
    SceneSpec s;
    s.width = j.value("width", 128);
    s.height = j.value("height", 128);
    s.seed = j.value("seed", std::uint64_t{0});
    for (const json& d : j.at("objects"))
      s.objects.push_back({d.at("cx").get<double>(), d.at("cy").get<double>(), d.at("radius").get<double>()});
    return s;
  });
  spec.validate();
  return spec;
}

std::string dataset_to_json(const ToyDataset& dataset) {
  json samples = json::array();
  for (const ToySample& s : dataset.samples) samples.push_back(sample_json(s));
  json fixed = json::array();
  for (const ToySample& s : dataset.fixed) fixed.push_back(sample_json(s));
  json counts = json::object();
  for (const auto& [k, v] : dataset.class_counts) counts[std::string(to_string(k))] = v;
  return json{{"positions", dataset.positions},
              {"channels", dataset.channels},
              {"noise_rate", dataset.noise_rate},
              {"class_counts", counts},
              {"fixed", fixed},
              {"samples", samples}}
      .dump();
}

ToyDataset dataset_from_json(const std::string& text) {
  const json j = parse(text, "dataset");
  ToyDataset ds = guarded("dataset", [&] {
    ToyDataset d;
    d.positions = j.at("positions").get<int>();
    d.channels = j.at("channels").get<int>();
    d.noise_rate = j.value("noise_rate", 0.0);
    for (const json& s : j.at("samples")) d.samples.push_back(sample_from(s));
    for (const json& s : j.at("fixed")) d.fixed.push_back(sample_from(s));
    return d;
  });
  require(ds.positions > 0 && ds.channels > 0, "dataset: non-positive dimensions");
  const std::size_t n = std::size_t(ds.positions) * ds.channels;
  for (const auto* pool : {&ds.samples, &ds.fixed})
    for (const ToySample& s : *pool) require(s.features.size() == n, "dataset: feature length mismatch");
  ds.recount();
  return ds;
}

std::string model_to_json(const ModelParams& params) {
  json layers = json::object();
  const auto ls = params.layers();
  for (int i = 0; i < kNumLayers; ++i) layers[kLayerNames[i]] = layer_json(*ls[i]);
  const ModelDims& d = params.dims;
  return json{{"dims",
               {{"positions", d.positions},
                {"in_channels", d.in_channels},
                {"backbone_channels", d.backbone_channels},
                {"branch_channels", d.branch_channels}}},
              {"prelu_slope", params.prelu_slope},
              {"dropout_rate", params.dropout_rate},
              {"apportionment", params.apportionment},
              {"layers", layers}}
      .dump();
}

ModelParams model_from_json(const std::string& text) {
  const json j = parse(text, "model");
  return guarded("model", [&] {
    const json& jd = j.at("dims");
    ModelDims d;
    d.positions = jd.at("positions").get<int>();
    d.in_channels = jd.at("in_channels").get<int>();
    d.backbone_channels = jd.at("backbone_channels").get<int>();
    d.branch_channels = jd.at("branch_channels").get<int>();
    require(d.positions > 0 && d.in_channels > 0 && d.backbone_channels > 0 && d.branch_channels > 0,
            "model: non-positive dimensions");
    ModelParams p(d);
    p.prelu_slope = j.at("prelu_slope").get<double>();
    p.dropout_rate = j.at("dropout_rate").get<double>();
    p.apportionment = j.at("apportionment").get<bool>();
    auto ls = p.layers();
    for (int i = 0; i < kNumLayers; ++i) layer_from(j.at("layers").at(kLayerNames[i]), *ls[i]);
    return p;
  });
}

std::string history_to_csv(std::span<const EpochStats> history) {
  std::ostringstream out;
  out << std::setprecision(12) << "epoch,loss,acc_micro,acc_macro\n";
  for (const EpochStats& e : history) out << e.epoch << ',' << e.loss << ',' << e.acc_micro << ',' << e.acc_macro << '\n';
  return out.str();
}

std::string reconstitution_report_to_json(const ReconstitutionReport& r) {
  json j{{"threshold", r.threshold},
         {"n_select", r.n_select},
         {"original_size", r.original_size},
         {"d_c_size", r.d_c_size},
         {"selected_ids", r.selected_ids},
         {"per_class_removed_fraction", lesion_map_json(r.per_class_removed_fraction)}};
  j["r_m"] = r.r_m ? json(*r.r_m) : json(nullptr);
  j["r_m_overall"] = r.r_m_overall ? json(*r.r_m_overall) : json(nullptr);
  return j.dump(2);
}

std::string eval_report_to_json(const EvalReport& r) {
  json confusion = json::array();
  for (int t = 0; t < r.confusion.classes(); ++t) {
    json row = json::array();
    for (int p = 0; p < r.confusion.classes(); ++p) row.push_back(r.confusion.at(t, p));
    confusion.push_back(row);
  }
  json labels = json::array();
  for (Lesion l : kAllLesions) labels.push_back(std::string(to_string(l)));
  return json{{"dice", r.dice},
              {"acc_micro", r.acc_micro},
              {"acc_macro", r.acc_macro},
              {"ap_per_class", lesion_map_json(r.ap_per_class)},
              {"map", r.map},
              {"confusion_labels", labels},
              {"confusion", confusion},
              {"n_segments", r.n_segments},
              {"n_negative", r.n_negative},
              {"n_dropped", r.n_dropped}}
      .dump(2);
}

std::string confusion_to_csv(const Confusion& c) {
  std::ostringstream out;
  out << "truth\\pred";
  const bool lesions = c.classes() == kNumLesions;
  for (int p = 0; p < c.classes(); ++p) out << ',' << (lesions ? std::string(to_string(kAllLesions[p])) : std::to_string(p));
  out << '\n';
  for (int t = 0; t < c.classes(); ++t) {
    out << (lesions ? std::string(to_string(kAllLesions[t])) : std::to_string(t));
    for (int p = 0; p < c.classes(); ++p) out << ',' << c.at(t, p);
    out << '\n';
  }
  return out.str();
}

std::string records_to_jsonl(std::span<const DetectionRecord> records) {
  std::string out;
  for (const DetectionRecord& r : records)
    out += json{{"scene_id", r.scene_id}, {"box", box_json(r.box)}, {"cls", std::string(to_string(r.cls))},
                {"confidence", r.confidence}}
               .dump() +
           "\n";
  return out;
}

std::string ground_truth_to_jsonl(std::span<const GroundTruthBox> gts) {
  std::string out;
  for (const GroundTruthBox& g : gts)
    out += json{{"scene_id", g.scene_id}, {"box", box_json(g.box)}, {"cls", std::string(to_string(g.cls))}}.dump() + "\n";
  return out;
}

namespace {

template <typename F>
void for_each_line(const std::string& text, const char* what, F&& f) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse(line, what);
    guarded(what, [&] {
      f(j);
      return 0;
    });
  }
}

}  // namespace

std::vector<DetectionRecord> records_from_jsonl(const std::string& text) {
  std::vector<DetectionRecord> out;
  for_each_line(text, "detection records", [&](const json& j) {
    DetectionRecord r{j.at("scene_id").get<std::string>(), box_from(j.at("box")),
                      parse_lesion(j.at("cls").get<std::string>()), j.at("confidence").get<double>()};
    require(r.confidence >= 0.0 && r.confidence <= 1.0, "confidence must lie in [0, 1]");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<GroundTruthBox> ground_truth_from_jsonl(const std::string& text) {
  std::vector<GroundTruthBox> out;
  for_each_line(text, "ground truth", [&](const json& j) {
    out.push_back({j.at("scene_id").get<std::string>(), box_from(j.at("box")), parse_lesion(j.at("cls").get<std::string>())});
  });
  return out;
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path, std::ios::binary);
  out << text;
  require(out.good(), "write failed: " + path.string());
}

}  // namespace glom::io
