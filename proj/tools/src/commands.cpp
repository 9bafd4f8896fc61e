#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "glomkit/errors.hpp"
#include "glomkit/io.hpp"
#include "glomkit/losses.hpp"
#include "glomkit/metrics.hpp"
#include "glomkit/pipeline.hpp"
#include "glomkit/sweep.hpp"
#include "glomkit/synthgen.hpp"
#include "glomkit/uaan.hpp"
#include "glomkit/uncertainty.hpp"

namespace glom::cli {
namespace {

using nlohmann::json;

struct Common {
  std::uint64_t seed = 0;
  std::string out = "out";
};

// Runners must hold the Common they were built with; CLI11 writes into it.
void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--out", c.out, "Output directory");
}

std::vector<LossId> parse_losses(const std::vector<std::string>& names) {
  std::vector<LossId> ids;
  for (const auto& n : names) {
    try {
      ids.push_back(parse_loss_id(n));
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
  }
  return ids;
}

std::vector<std::string> all_loss_names() {
  std::vector<std::string> names;
  for (LossId id : kAllLossIds) names.emplace_back(to_string(id));
  return names;
}

std::vector<Disc> parse_discs(const std::vector<std::string>& specs) {
  std::vector<Disc> discs;
  for (const auto& s : specs) {
    Disc d;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> d.cx >> c1 >> d.cy >> c2 >> d.radius) || c1 != ',' || c2 != ',' || !in.eof()) {
      throw UsageError("--disc expects cx,cy,radius, got '" + s + "'");
    }
    discs.push_back(d);
  }
  return discs;
}

// Scene from --scene, else from --disc or --gtr.
struct SceneOpts {
  std::string scene_path;
  int width = 128;
  int height = 128;
  double gtr = 0.06;
  std::vector<std::string> discs;

  void add(CLI::App* sub) {
    sub->add_option("--scene", scene_path, "Scene JSON written by 'gen --kind scene'");
    sub->add_option("--width", width, "Image width")->check(CLI::PositiveNumber);
    sub->add_option("--height", height, "Image height")->check(CLI::PositiveNumber);
    sub->add_option("--gtr", gtr, "Ground-truth ratio of a single centered disc");
    sub->add_option("--disc", discs, "Disc cx,cy,radius (repeatable)");
  }

  SceneSpec resolve(std::uint64_t seed) const {
    if (!scene_path.empty()) return io::scene_spec_from_json(io::read_text(scene_path));
    SceneSpec spec;
    if (discs.empty()) {
      if (!(gtr > 0.0 && gtr < 1.0)) throw UsageError("--gtr must be in (0, 1)");
      spec = single_disc_spec(width, height, gtr);
    } else {
      spec.width = width;
      spec.height = height;
      spec.objects = parse_discs(discs);
    }
    spec.seed = seed;
    return spec;
  }
};

struct DataOpts {
  int total = 2311;
  int balanced = 0;
  double noise_rate = 0.0;
  double parent_strength = 1.5;
  double common_strength = 1.5;
  double child_strength = 1.0;
  double distractor_strength = 1.0;
  double noise_sigma = 0.5;

  void add(CLI::App* sub) {
    sub->add_option("--total", total, "Approximate sample count at the clinical class imbalance");
    sub->add_option("--balanced", balanced, "Samples per class instead of --total (0: off)");
    sub->add_option("--noise-rate", noise_rate, "Probability of flipping a CSN child label")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--parent-strength", parent_strength);
    sub->add_option("--common-strength", common_strength);
    sub->add_option("--child-strength", child_strength);
    sub->add_option("--distractor-strength", distractor_strength);
    sub->add_option("--noise-sigma", noise_sigma);
  }

  DatasetConfig config() const {
    DatasetConfig cfg = balanced > 0 ? DatasetConfig::balanced(balanced) : DatasetConfig::imbalanced(total);
    cfg.parent_strength = parent_strength;
    cfg.common_strength = common_strength;
    cfg.child_strength = child_strength;
    cfg.distractor_strength = distractor_strength;
    cfg.noise_sigma = noise_sigma;
    return cfg;
  }
};

json scores_json(const ClassificationScores& s) {
  return {{"acc_micro", s.acc_micro}, {"acc_macro", s.acc_macro}, {"child_acc_macro", s.child_acc_macro}};
}

// ---------------------------------------------------------------------------

void add_gen(CLI::App& app, std::map<std::string, Runner>& runners) {
  auto* sub = app.add_subcommand("gen", "Generate synthetic scenes, toy datasets or slides");
  auto c = std::make_shared<Common>();
  auto kind = std::make_shared<std::string>("scene");
  auto scene = std::make_shared<SceneOpts>();
  auto data = std::make_shared<DataOpts>();
  auto count = std::make_shared<int>(20);
  add_common(sub, *c);
  sub->add_option("--kind", *kind, "scene, dataset or slides")
      ->check(CLI::IsMember({"scene", "dataset", "slides"}));
  scene->add(sub);
  data->add(sub);
  sub->add_option("--count", *count, "Number of slides")->check(CLI::PositiveNumber);

  runners["gen"] = [=](RunContext& ctx) {
    if (*kind == "scene") {
      const SceneSpec spec = scene->resolve(c->seed);
      const SceneSample s = circle_scene(spec);
      ctx.write("scene.json", io::scene_to_json(spec, s));
      io::write_pgm_image(ctx.path("image.pgm"), s.image);
      ctx.record("image.pgm");
      io::write_pgm_mask(ctx.path("mask.pgm"), s.mask);
      ctx.record("mask.pgm");
      std::cout << "scene gtr " << s.gtr << ", " << s.instances.count() << " instances\n";
    } else if (*kind == "dataset") {
      const ToyDataset ds = hierarchy_dataset(data->config(), c->seed, data->noise_rate);
      ctx.write("dataset.json", io::dataset_to_json(ds));
      std::cout << ds.samples.size() << " samples, " << ds.fixed.size() << " fixed\n";
    } else {
      const auto slides = synthetic_slides(*count, SlideConfig{}, data->config(), c->seed);
      json index = json::array();
      for (const SlideScene& s : slides) {
        io::write_pgm_image(ctx.path(s.id + "_image.pgm"), s.scene.image);
        ctx.record(s.id + "_image.pgm");
        io::write_pgm_mask(ctx.path(s.id + "_mask.pgm"), s.scene.mask);
        ctx.record(s.id + "_mask.pgm");
        json classes = json::array();
        for (Lesion l : s.instance_classes) classes.push_back(std::string(to_string(l)));
        index.push_back({{"id", s.id}, {"classes", classes}});
      }
      ctx.write("slides.json", index.dump(2) + "\n");
      ctx.write("ground_truth.jsonl", io::ground_truth_to_jsonl(slide_ground_truth(slides)));
      std::cout << slides.size() << " slides\n";
    }
    return 0;
  };
}

std::vector<double> parse_range(const std::string& spec) {
  double start = 0, stop = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' || !in.eof()) {
    throw UsageError("--displacement-range expects start:stop:step, got '" + spec + "'");
  }
  if (!(step > 0.0) || stop < start || start < 0.0) throw UsageError("invalid displacement range " + spec);
  std::vector<double> values;
  const long n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) values.push_back(start + static_cast<double>(i) * step);
  return values;
}

void add_loss_sweep(CLI::App& app, std::map<std::string, Runner>& runners) {
  auto* sub = app.add_subcommand("loss-sweep", "Loss value against displacement of a disc prediction");
  auto c = std::make_shared<Common>();
  auto gtrs = std::make_shared<std::vector<double>>(std::vector<double>{0.06, 0.3, 0.6});
  auto displacements = std::make_shared<std::vector<double>>();
  auto range = std::make_shared<std::string>("0:128:1");
  auto losses = std::make_shared<std::vector<std::string>>(
      std::vector<std::string>{"dice", "ssim", "iss", "fiss", "compound"});
  auto size = std::make_shared<int>(128);
  add_common(sub, *c);
  sub->add_option("--gtr", *gtrs, "Ground-truth ratios in (0, 1)")->delimiter(',');
  sub->add_option("--displacements", *displacements, "Explicit displacement list (pixels)")->delimiter(',');
  sub->add_option("--displacement-range", *range, "start:stop:step, used without --displacements");
  sub->add_option("--losses", *losses, "Loss ids")->delimiter(',');
  sub->add_option("--size", *size, "Square image side")->check(CLI::PositiveNumber);

  runners["loss-sweep"] = [=, keep = c](RunContext& ctx) {
    const std::vector<double> grid = displacements->empty() ? parse_range(*range) : *displacements;
    if (gtrs->empty() || grid.empty()) throw UsageError("empty sweep grid");
    for (double g : *gtrs) {
      if (!(g > 0.0 && g < 1.0)) throw UsageError("gtr values must be in (0, 1)");
    }
    for (double d : grid) {
      if (!(std::isfinite(d) && d >= 0.0)) throw UsageError("displacements must be finite and >= 0");
    }
    const auto ids = parse_losses(*losses);
    SweepConfig cfg;
    cfg.width = cfg.height = *size;
    const auto rows = loss_sweep(*gtrs, grid, ids, cfg);
    ctx.write("sweep.csv", sweep_to_csv(rows));
    std::cout << rows.size() << " rows\n";
    return 0;
  };
}

void add_fit_mask(CLI::App& app, std::map<std::string, Runner>& runners) {
  auto* sub = app.add_subcommand("fit-mask", "Fit a free probability map to a scene mask");
  auto c = std::make_shared<Common>();
  auto scene = std::make_shared<SceneOpts>();
  auto loss = std::make_shared<std::string>("compound");
  auto steps = std::make_shared<int>(2000);
  auto lr = std::make_shared<double>(0.5);
  add_common(sub, *c);
  scene->add(sub);
  sub->add_option("--loss", *loss, "Loss id");
  sub->add_option("--steps", *steps, "Gradient steps")->check(CLI::NonNegativeNumber);
  sub->add_option("--lr", *lr, "Per-pixel learning rate");

  runners["fit-mask"] = [=](RunContext& ctx) {
    const LossId id = parse_losses({*loss}).front();
    const SceneSample s = circle_scene(scene->resolve(c->seed));
    const FitResult fit = direct_fit(s, id, *steps, *lr);
    io::write_probability_map(ctx.path("prediction.f64"), fit.prediction);
    ctx.record("prediction.f64");
    ctx.record("prediction.f64.json");
    io::write_pgm_mask(ctx.path("prediction.pgm"), fit.prediction);
    ctx.record("prediction.pgm");
    std::ostringstream trace;
    trace.precision(12);
    trace << "step,soft_dice\n";
    for (std::size_t i = 0; i < fit.dice_trace.size(); ++i) trace << i << ',' << fit.dice_trace[i] << '\n';
    ctx.write("dice_trace.csv", trace.str());
    const double hard = dice_score(fit.prediction, s.mask);
    const json summary = {{"loss", std::string(to_string(id))},
                          {"steps", *steps},
                          {"soft_dice", fit.dice_trace.empty() ? soft_dice(fit.prediction, s.mask)
                                                               : fit.dice_trace.back()},
                          {"dice", hard}};
    ctx.write("fit.json", summary.dump(2) + "\n");
    std::cout << "dice " << hard << "\n";
    return 0;
  };
}

void add_train(CLI::App& app, std::map<std::string, Runner>& runners) {
  auto* sub = app.add_subcommand("train", "Train the dual-branch classifier on a toy dataset");
  auto c = std::make_shared<Common>();
  auto data = std::make_shared<DataOpts>();
  auto dataset = std::make_shared<std::string>();
  auto eval = std::make_shared<std::string>();
  auto tc = std::make_shared<TrainConfig>();
  auto no_apportionment = std::make_shared<bool>(false);
  tc->learning_rate = 1e-3;
  add_common(sub, *c);
  data->add(sub);
  sub->add_option("--dataset", *dataset, "Dataset JSON (generated from the data options when absent)");
  sub->add_option("--eval-dataset", *eval, "Dataset JSON scored after training");
  sub->add_option("--epochs", tc->epochs)->check(CLI::NonNegativeNumber);
  sub->add_option("--batch-size", tc->batch_size)->check(CLI::PositiveNumber);
  sub->add_option("--lr", tc->learning_rate);
  sub->add_option("--lr-decay", tc->lr_decay);
  sub->add_option("--dropout", tc->dropout_rate)->check(CLI::Range(0.0, 0.99));
  sub->add_option("--backbone-channels", tc->dims.backbone_channels)->check(CLI::PositiveNumber);
  sub->add_option("--branch-channels", tc->dims.branch_channels)->check(CLI::PositiveNumber);
  sub->add_flag("--no-apportionment", *no_apportionment, "Replace the grasper gate by ones");

  runners["train"] = [=](RunContext& ctx) {
    const ToyDataset ds = dataset->empty() ? hierarchy_dataset(data->config(), c->seed, data->noise_rate)
                                           : io::dataset_from_json(io::read_text(*dataset));
    std::optional<ToyDataset> held_out;
    if (!eval->empty()) held_out = io::dataset_from_json(io::read_text(*eval));
    TrainConfig cfg = *tc;
    cfg.seed = c->seed;
    cfg.apportionment = !*no_apportionment;
    const TrainResult result = train(ds, cfg, held_out ? &*held_out : nullptr);
    ctx.write("model.json", io::model_to_json(result.params));
    ctx.write("history.csv", io::history_to_csv(result.history));
    json scores = {{"train", scores_json(score(ds.samples, result.params))}};
    if (held_out) scores["eval"] = scores_json(score(held_out->samples, result.params));
    ctx.write("scores.json", scores.dump(2) + "\n");
    std::cout << scores.dump() << "\n";
    return 0;
  };
}

void add_reconstitute(CLI::App& app, std::map<std::string, Runner>& runners) {
  auto* sub = app.add_subcommand("reconstitute", "Drop high-uncertainty samples from a dataset");
  auto c = std::make_shared<Common>();
  auto dataset = std::make_shared<std::string>();
  auto model = std::make_shared<std::string>();
  auto threshold = std::make_shared<double>(0.5);
  add_common(sub, *c);
  sub->add_option("--dataset", *dataset, "Dataset JSON")->required();
  sub->add_option("--model", *model, "Model JSON")->required();
  sub->add_option("--threshold", *threshold, "Uncertainty threshold")->check(CLI::Range(0.0, 2.0));

  runners["reconstitute"] = [=, keep = c](RunContext& ctx) {
    const ToyDataset ds = io::dataset_from_json(io::read_text(*dataset));
    const ModelParams params = io::model_from_json(io::read_text(*model));
    const std::vector<double> u = pool_uncertainty(ds, params);
    const auto [d_c, report] = reconstitute_with(ds, u, *threshold);
    std::ostringstream csv;
    csv.precision(12);
    csv << "id,label,uncertainty,selected\n";
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      csv << ds.samples[i].id << ',' << to_string(ds.samples[i].lesion()) << ',' << u[i] << ','
          << (u[i] > *threshold ? 1 : 0) << '\n';
    }
    ctx.write("uncertainty.csv", csv.str());
    ctx.write("dataset.json", io::dataset_to_json(d_c));
    ctx.write("report.json", io::reconstitution_report_to_json(report));
    std::cout << report.n_select << " of " << report.original_size << " samples selected\n";
    return 0;
  };
}

void add_eval(CLI::App& app, std::map<std::string, Runner>& runners) {
  auto* sub = app.add_subcommand("eval", "Score detections, or run the two-stage pipeline on synthetic slides");
  auto c = std::make_shared<Common>();
  auto records = std::make_shared<std::string>();
  auto gt = std::make_shared<std::string>();
  auto iou = std::make_shared<double>(0.5);
  auto slides = std::make_shared<int>(20);
  auto classifier = std::make_shared<std::string>("oracle");
  auto model = std::make_shared<std::string>();
  auto seg_dir = std::make_shared<std::string>();
  auto min_area = std::make_shared<long>(100);
  add_common(sub, *c);
  auto* rec_opt = sub->add_option("--records", *records, "Detection records JSONL");
  auto* gt_opt = sub->add_option("--ground-truth", *gt, "Ground-truth boxes JSONL");
  rec_opt->needs(gt_opt);
  gt_opt->needs(rec_opt);
  sub->add_option("--iou", *iou, "IoU threshold for a true positive")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--slides", *slides, "Synthetic slide count (pipeline mode)")->check(CLI::PositiveNumber);
  sub->add_option("--classifier", *classifier, "oracle or model")->check(CLI::IsMember({"oracle", "model"}));
  sub->add_option("--model", *model, "Model JSON for --classifier model");
  sub->add_option("--seg-dir", *seg_dir,
                  "Directory of <slide id>.f64 probability maps (default: ground-truth masks)");
  sub->add_option("--min-area", *min_area, "Tiny-object filter in pixels")->check(CLI::NonNegativeNumber);

  runners["eval"] = [=](RunContext& ctx) {
    if (!records->empty()) {
      const auto preds = io::records_from_jsonl(io::read_text(*records));
      const auto gts = io::ground_truth_from_jsonl(io::read_text(*gt));
      const MapResult m = map50(preds, gts, kDetectionClasses, *iou);
      json per_class = json::object();
      for (const auto& [cls, ap] : m.ap_per_class) per_class[std::string(to_string(cls))] = ap;
      const json report = {{"map", m.map}, {"ap_per_class", per_class}, {"iou_threshold", *iou}};
      ctx.write("report.json", report.dump(2) + "\n");
      std::cout << "mAP " << m.map << "\n";
      return 0;
    }
    const auto scenes = synthetic_slides(*slides, SlideConfig{}, DatasetConfig::imbalanced(2311), c->seed);
    std::vector<PixelMap> maps;
    for (const SlideScene& s : scenes) {
      maps.push_back(seg_dir->empty() ? s.scene.mask
                                      : io::read_probability_map(fs::path(*seg_dir) / (s.id + ".f64")));
    }
    Classifier cls;
    if (*classifier == "model") {
      if (model->empty()) throw UsageError("--classifier model requires --model");
      cls = toy_classifier(io::model_from_json(io::read_text(*model)));
    } else {
      cls = oracle_classifier();
    }
    const TwoStageResult r = run_two_stage(scenes, maps, cls, *min_area, *iou);
    ctx.write("report.json", io::eval_report_to_json(r.report));
    ctx.write("confusion.csv", io::confusion_to_csv(r.report.confusion));
    ctx.write("records.jsonl", io::records_to_jsonl(r.records));
    ctx.write("ground_truth.jsonl", io::ground_truth_to_jsonl(r.ground_truth));
    std::cout << "mAP " << r.report.map << ", dice " << r.report.dice << "\n";
    return 0;
  };
}

void add_gradcheck(CLI::App& app, std::map<std::string, Runner>& runners) {
  auto* sub = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  auto c = std::make_shared<Common>();
  auto losses = std::make_shared<std::vector<std::string>>(all_loss_names());
  auto size = std::make_shared<int>(16);
  auto repeats = std::make_shared<int>(5);
  auto coords = std::make_shared<int>(100);
  auto tolerance = std::make_shared<double>(1e-3);
  add_common(sub, *c);
  sub->add_option("--losses", *losses, "Loss ids")->delimiter(',');
  sub->add_option("--size", *size, "Square map side")->check(CLI::Range(8, 512));
  sub->add_option("--repeats", *repeats, "Random maps per loss")->check(CLI::PositiveNumber);
  sub->add_option("--coords", *coords, "Pixels probed per map")->check(CLI::PositiveNumber);
  sub->add_option("--tolerance", *tolerance, "Maximum relative error");

  runners["gradcheck"] = [=](RunContext& ctx) {
    const auto ids = parse_losses(*losses);
    std::vector<double> worst(ids.size(), 0.0);
    for (int r = 0; r < *repeats; ++r) {
      const std::uint64_t seed = c->seed + static_cast<std::uint64_t>(r);
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> uni(0.02, 0.98);
      PixelMap p(*size, *size);
      for (int y = 0; y < *size; ++y) {
        for (int x = 0; x < *size; ++x) p(x, y) = uni(rng);
      }
      SceneSpec spec;
      spec.width = spec.height = *size;
      spec.objects = {{*size / 2.0, *size / 2.0, *size * (0.19 + 0.03 * r)}};
      const SceneSample scene = circle_scene(spec);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const double e = fd_gradient_check(ids[i], p, scene.mask, scene.instances, {}, 1e-5, *coords, seed);
        worst[i] = std::max(worst[i], e);
      }
    }
    std::ostringstream csv;
    csv.precision(6);
    csv << "loss_id,max_rel_error\n";
    bool ok = true;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      csv << to_string(ids[i]) << ',' << worst[i] << '\n';
      std::cout << to_string(ids[i]) << ' ' << worst[i] << (worst[i] < *tolerance ? "" : "  FAIL") << '\n';
      ok = ok && worst[i] < *tolerance;
    }
    ctx.write("gradcheck.csv", csv.str());
    return ok ? 0 : 3;
  };
}

}  // namespace

std::map<std::string, Runner> register_commands(CLI::App& app) {
  std::map<std::string, Runner> runners;
  add_gen(app, runners);
  add_loss_sweep(app, runners);
  add_fit_mask(app, runners);
  add_train(app, runners);
  add_reconstitute(app, runners);
  add_eval(app, runners);
  add_gradcheck(app, runners);
  return runners;
}

}  // namespace glom::cli
