// Runs the ten acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "glomkit/losses.hpp"
#include "glomkit/metrics.hpp"
#include "glomkit/pipeline.hpp"
#include "glomkit/sweep.hpp"
#include "glomkit/uaan.hpp"
#include "glomkit/uncertainty.hpp"
#include "oracles.hpp"

using namespace glom;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

double uaan_batch_fd_error() {
  DatasetConfig dc;
  dc.positions = 3;
  dc.channels = 4;
  dc.active_positions = 1;
  dc.distractor_positions = 1;
  std::vector<ToySample> s = {draw_toy_sample(dc, Lesion::SS, 1, 0), draw_toy_sample(dc, Lesion::GS, 2, 1),
                              draw_toy_sample(dc, Lesion::C, 3, 2), draw_toy_sample(dc, Lesion::Neg, 4, 3)};
  s[0].is_fixed = true;
  const std::vector<const ToySample*> regular = {&s[1], &s[2], &s[3]};
  const BatchLayout batch = make_batch(&s[0], regular);

  std::mt19937_64 rng(7);
  ModelParams params = glorot_init({3, 4, 4, 4}, rng);
  for (DenseLayer* l : params.layers())
    for (double& b : l->bias) b = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  const LossWeights w{{0.5, 0.3, 0.2}, {0.3, 0.3, 0.4}};
  auto loss_of = [&](const ModelParams& p) {
    std::mt19937_64 unused(0);
    return loss_and_grads(forward(batch, p, {}, unused), batch, p, w).loss;
  };
  std::mt19937_64 unused(0);
  const auto analytic = flatten(loss_and_grads(forward(batch, params, {}, unused), batch, params, w).grads);
  auto values = flatten(params);
  ModelParams probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = 1e-6, orig = values[i];
    values[i] = orig + h;
    unflatten(values, probe);
    const double up = loss_of(probe);
    values[i] = orig - h;
    unflatten(values, probe);
    const double down = loss_of(probe);
    values[i] = orig;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-3}));
  }
  return worst;
}

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const LossId ids[] = {LossId::Dice, LossId::Focal, LossId::Tversky, LossId::Iss, LossId::Fiss, LossId::Compound};
  double worst = 0.0;
  std::string worst_loss;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PixelMap p = oracle::random_map(16, 16, seed, 0.02, 0.98);
    SceneSpec spec;
    spec.width = 16;
    spec.height = 16;
    spec.objects = {{8.0, 8.0, 3.0 + 0.5 * seed}};
    const SceneSample scene = circle_scene(spec);
    for (LossId id : ids) {
      const double e = fd_gradient_check(id, p, scene.mask, scene.instances, {}, 1e-5, 100, seed);
      if (e > worst) {
        worst = e;
        worst_loss = std::string(to_string(id));
      }
    }
  }
  const double uaan = uaan_batch_fd_error();
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && uaan < 1e-4 && secs < 60.0,
          fmt("loss max rel err %.2e (%s), UAAN max rel err %.2e, %.1f s", worst, worst_loss.c_str(), uaan, secs)};
}

// ---------------------------------------------------------------------------

Outcome loss_sweep_direction() {
  const auto t0 = std::chrono::steady_clock::now();
  const LossId ids[] = {LossId::Dice, LossId::Ssim, LossId::Iss, LossId::Fiss, LossId::Compound};
  std::vector<double> displacements;
  for (int d = 0; d <= 128; ++d) displacements.push_back(d);

  bool monotone = true;
  std::string violations;
  double iss_small = 0, ssim_small = 0, iou_small = 0;
  double rel_large = 0;
  for (double gtr : {0.06, 0.30, 0.60}) {
    const double g[] = {gtr};
    const auto rows = loss_sweep(g, displacements, ids);
    const std::size_t nl = std::size(ids);
    // First displacement at which the discs no longer overlap.
    std::size_t last = 0;
    while (last < displacements.size() && rows[last * nl].iou > 0.0) ++last;
    for (std::size_t l = 0; l < nl; ++l) {
      double worst_drop = 0.0;
      int at = -1;
      for (std::size_t d = 1; d <= last && d < displacements.size(); ++d) {
        const double drop = rows[(d - 1) * nl + l].value - rows[d * nl + l].value;
        if (drop > 1e-12 && drop > worst_drop) {
          worst_drop = drop;
          at = static_cast<int>(d);
        }
      }
      if (at >= 0) {
        monotone = false;
        violations += fmt(" %s@%.2f(d=%d,-%.1e)", std::string(to_string(ids[l])).c_str(), gtr, at, worst_drop);
      }
    }
    if (gtr == 0.06) {
      // Displacement whose IoU is closest to 0.8.
      std::size_t best = 0;
      for (std::size_t d = 0; d < displacements.size(); ++d)
        if (std::abs(rows[d * nl].iou - 0.8) < std::abs(rows[best * nl].iou - 0.8)) best = d;
      iou_small = rows[best * nl].iou;
      ssim_small = rows[best * nl + 1].value;
      iss_small = rows[best * nl + 2].value;
    }
    if (gtr == 0.60) {
      double ssim_sum = 0, iss_sum = 0;
      for (std::size_t d = 0; d <= last && d < displacements.size(); ++d) {
        ssim_sum += rows[d * nl + 1].value;
        iss_sum += rows[d * nl + 2].value;
      }
      rel_large = std::abs(iss_sum - ssim_sum) / ssim_sum;
    }
  }
  const double secs = seconds_since(t0);
  const bool b = iss_small > ssim_small;
  const bool c = rel_large <= 0.20;
  std::string detail = fmt("(a) %s; (b) IoU %.2f ISS %.4f vs SSIM %.4f %s; (c) rel diff %.3f %s; %.1f s",
                           monotone ? "monotone" : ("non-monotone:" + violations).c_str(), iou_small,
                           iss_small, ssim_small, b ? "ok" : "FAIL", rel_large, c ? "ok" : "FAIL", secs);
  return {monotone && b && c && secs < 120.0, detail};
}

// ---------------------------------------------------------------------------

Outcome direct_fit_convergence() {
  SceneSpec spec;
  spec.objects = {{32, 36, 14}, {88, 40, 18}, {60, 94, 22}};
  const SceneSample scene = circle_scene(spec);
  const FitResult zero = direct_fit(scene, LossId::Compound, 0, 0.5);
  const double g = scene.mask.sum();
  const double closed = 2.0 * (0.5 * g) / (0.5 * scene.mask.size() + g);
  const double base = soft_dice(zero.prediction, scene.mask);
  const FitResult fit = direct_fit(scene, LossId::Compound, 2000, 0.5);
  const double hard = dice_score(fit.prediction, scene.mask);
  const bool ok = scene.instances.count() == 3 && hard >= 0.95 && std::abs(base - closed) < 1e-12;
  return {ok, fmt("Dice after 2000 steps %.4f (soft %.4f), zero-step %.6f vs closed form %.6f", hard,
                  fit.dice_trace.back(), base, closed)};
}

// ---------------------------------------------------------------------------

Outcome csn_index_example() {
  using P = ParentClass;
  const P labels[] = {P::CSN, parent_of(Lesion::NoA), P::GS, parent_of(Lesion::SS),
                      parent_of(Lesion::SS), P::Neg, parent_of(Lesion::C), P::Neg};
  const auto idx = build_csn_index_list(labels, true);
  const bool ok = std::size(labels) == 8 && idx == std::vector<int>{0, 1, 3, 4, 6};
  std::string s;
  for (int i : idx) s += std::to_string(i) + " ";
  return {ok, fmt("N=8, m=%zu, list [ %s]", idx.size(), s.c_str())};
}

// ---------------------------------------------------------------------------

// Toy setting for the apportionment comparison: strong decoy child signatures
// at positions without the shared CSN feature.
DatasetConfig apportionment_config() {
  DatasetConfig cfg = DatasetConfig::imbalanced(2311);
  cfg.parent_strength = 1.5;
  cfg.common_strength = 2.0;
  cfg.child_strength = 0.5;
  cfg.distractor_strength = 4.0;
  cfg.distractor_positions = 4;
  cfg.noise_sigma = 1.0;
  return cfg;
}

TrainConfig apportionment_train(std::uint64_t seed, bool apportionment) {
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 1e-3;
  cfg.seed = seed;
  cfg.apportionment = apportionment;
  return cfg;
}

Outcome apportionment_direction() {
  const DatasetConfig dc = apportionment_config();
  DatasetConfig tc = dc;
  tc.counts = {200, 200, 200, 200, 200};
  std::vector<double> with, without, diffs;
  for (std::uint64_t seed = 1; seed <= 7; ++seed) {
    const ToyDataset train_set = hierarchy_dataset(dc, seed, 0.0);
    const ToyDataset test_set = hierarchy_dataset(tc, 1000 + seed, 0.0);
    const double a = score(test_set.samples, train(train_set, apportionment_train(seed, true)).params).child_acc_macro;
    const double b = score(test_set.samples, train(train_set, apportionment_train(seed, false)).params).child_acc_macro;
    with.push_back(a);
    without.push_back(b);
    diffs.push_back(a - b);
  }
  const double p = rank_sum_test(with, without);
  const double gain = median(with) - median(without);
  return {gain > 0.0 && p < 0.1,
          fmt("child macro-acc median %.4f vs %.4f (gain %+.4f, median paired %+.4f), rank-sum p=%.4f",
              median(with), median(without), gain, median(diffs), p)};
}

// ---------------------------------------------------------------------------

DatasetConfig noisy_config() { return DatasetConfig::imbalanced(2311); }

TrainConfig noisy_train(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 1e-3;
  cfg.seed = seed;
  return cfg;
}

// Threshold leaving the top 10% of the pool above it.
double decile_threshold(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  return u[static_cast<std::size_t>(0.9 * u.size())];
}

Outcome reconstitution_enrichment() {
  std::vector<double> enrichment;
  double min_frac = 1.0, max_frac = 0.0;
  bool sweep_ok = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ToyDataset ds = hierarchy_dataset(noisy_config(), seed, 0.08);
    const ModelParams model = train(ds, noisy_train(seed)).params;
    const std::vector<double> u = pool_uncertainty(ds, model);
    const auto [kept, report] = reconstitute_with(ds, u, decile_threshold(u));
    const double frac = static_cast<double>(report.n_select) / report.original_size;
    min_frac = std::min(min_frac, frac);
    max_frac = std::max(max_frac, frac);
    enrichment.push_back(*report.r_m / *report.r_m_overall);
    int previous = report.original_size + 1;
    for (int k = 3; k <= 9; ++k) {
      const int n = reconstitute_with(ds, u, k / 10.0).second.n_select;
      sweep_ok = sweep_ok && n <= previous;
      previous = n;
    }
  }
  const double med = median(enrichment);
  const bool ok = med >= 1.5 && min_frac >= 0.05 && max_frac <= 0.15 && sweep_ok;
  return {ok, fmt("median R_m enrichment %.2f, selected %.1f%%-%.1f%% of the pool, n_select over 0.3..0.9 %s",
                  med, 100 * min_frac, 100 * max_frac, sweep_ok ? "non-increasing" : "NOT monotone")};
}

Outcome reconstituted_training() {
  DatasetConfig tc = noisy_config();
  tc.counts = {200, 200, 200, 200, 200};
  std::vector<double> acc_r, acc_c;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ToyDataset d_r = hierarchy_dataset(noisy_config(), seed, 0.08);
    const ToyDataset test_set = hierarchy_dataset(tc, 2000 + seed, 0.0);
    const ModelParams m_r = train(d_r, noisy_train(seed)).params;
    const std::vector<double> u = pool_uncertainty(d_r, m_r);
    const ToyDataset d_c = reconstitute_with(d_r, u, decile_threshold(u)).first;
    const ModelParams m_c = train(d_c, noisy_train(seed)).params;
    acc_r.push_back(score(test_set.samples, m_r).acc_macro);
    acc_c.push_back(score(test_set.samples, m_c).acc_macro);
  }
  return {median(acc_c) >= median(acc_r),
          fmt("five-way macro-acc median D_c %.4f vs D_r %.4f", median(acc_c), median(acc_r))};
}

// ---------------------------------------------------------------------------

Outcome metric_oracles() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pos(0, 20), size(2, 10), nbox(0, 6), cls(0, 1);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  const char* scenes[] = {"a", "b"};
  double ap_err = 0.0;
  int ap_cases = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GroundTruthBox> gts;
    std::vector<DetectionRecord> preds;
    const int ng = nbox(rng), np = nbox(rng);
    for (int i = 0; i < ng; ++i) {
      const int x = pos(rng), y = pos(rng), s = size(rng);
      gts.push_back({scenes[cls(rng)], {x, y, x + s, y + s}, kDetectionClasses[cls(rng)]});
    }
    for (int i = 0; i < np; ++i) {
      Box b;
      if (!gts.empty() && i % 2 == 0) {
        b = gts[rng() % gts.size()].box;
        b.x1 += static_cast<int>(rng() % 3);
      } else {
        const int x = pos(rng), y = pos(rng), s = size(rng);
        b = {x, y, x + s, y + s};
      }
      preds.push_back({scenes[cls(rng)], b, kDetectionClasses[cls(rng)], conf(rng)});
    }
    for (int c = 0; c < 2; ++c) {
      const double ref = oracle::brute_force_ap(preds, gts, kDetectionClasses[c], 0.5);
      const auto ap = average_precision(preds, gts, kDetectionClasses[c], 0.5);
      if (ref < 0) {
        if (ap) ap_err = 1.0;
      } else {
        ++ap_cases;
        ap_err = std::max(ap_err, ap ? std::abs(*ap - ref) : 1.0);
      }
    }
  }

  int cc_mismatch = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const PixelMap m = oracle::random_mask(24 + seed % 7, 18 + seed % 5, seed, 0.3 + 0.01 * seed);
    const bool eight = seed % 2 == 0;
    const InstanceSet s = connected_components(m, 0.5, eight ? Connectivity::Eight : Connectivity::Four);
    cc_mismatch += s.label_map != oracle::flood_fill_labels(m, 0.5, eight);
  }

  Confusion c(3);
  c.at(0, 0) = 5;
  c.at(0, 2) = 5;
  c.at(1, 1) = 3;
  c.at(2, 2) = 1;
  c.at(2, 0) = 3;
  const auto [micro, macro] = accuracy(c);
  const bool acc_ok = std::abs(micro - 9.0 / 17.0) < 1e-15 && std::abs(macro - (0.5 + 1.0 + 0.25) / 3.0) < 1e-15;

  double rs_err = 0.0;
  std::uniform_int_distribution<int> val(0, 8), len(3, 6);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> a(len(rng)), b(len(rng));
    for (double& x : a) x = val(rng);
    for (double& x : b) x = val(rng) + trial % 3;
    rs_err = std::max(rs_err, std::abs(rank_sum_test(a, b, RankSumMode::Exact) - oracle::permutation_rank_sum(a, b)));
  }

  const bool ok = ap_err <= 1e-12 && cc_mismatch == 0 && acc_ok && rs_err <= 1e-12;
  return {ok, fmt("AP max err %.1e over %d class cases, CC mismatches %d/50, accuracy %s, rank-sum max err %.1e",
                  ap_err, ap_cases, cc_mismatch, acc_ok ? "ok" : "wrong", rs_err)};
}

// ---------------------------------------------------------------------------

Outcome uncertainty_algebra() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double self_err = 0.0, sym_err = 0.0, perm_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int k = 2 + i % 4;
    std::vector<double> p(k), q(k);
    for (double& v : p) v = u(rng);
    for (double& v : q) v = u(rng);
    self_err = std::max(self_err, std::abs(uncertainty_factor(p, p)));
    sym_err = std::max(sym_err, std::abs(uncertainty_factor(p, q) - uncertainty_factor(q, p)));
    std::vector<int> order(k);
    for (int j = 0; j < k; ++j) order[j] = j;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> pp(k), qp(k);
    for (int j = 0; j < k; ++j) {
      pp[j] = p[order[j]];
      qp[j] = q[order[j]];
    }
    perm_err = std::max(perm_err, std::abs(uncertainty_factor(p, q) - uncertainty_factor(pp, qp)));
  }
  const double a[] = {0.8, 0.2}, b[] = {0.3, 0.7}, flat[] = {0.25, 0.25, 0.25, 0.25}, x[] = {0.1, 0.2, 0.3, 0.4};
  const double anti = uncertainty_factor(a, b);
  const double constant = uncertainty_factor(flat, x);
  const bool ok = self_err < 1e-12 && sym_err < 1e-12 && perm_err < 1e-12 && std::abs(anti - 2.0) < 1e-12 &&
                  constant == 1.0;
  return {ok, fmt("U(p,p) err %.1e, K=2 anti-ordered U=%.6f, constant U=%.1f, symmetry err %.1e, permutation err %.1e",
                  self_err, anti, constant, sym_err, perm_err)};
}

// ---------------------------------------------------------------------------

Outcome end_to_end() {
  const auto slides = synthetic_slides(20, SlideConfig{}, DatasetConfig::imbalanced(2311), 3);
  std::vector<PixelMap> maps;
  for (const SlideScene& s : slides) maps.push_back(s.scene.mask);
  const TwoStageResult oracle_run = run_two_stage(slides, maps, oracle_classifier());

  auto toy_map = [&](std::uint64_t seed) {
    const ToyDataset ds = hierarchy_dataset(DatasetConfig::imbalanced(1200), seed, 0.0);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 1e-3;
    cfg.seed = seed;
    return run_two_stage(slides, maps, toy_classifier(train(ds, cfg).params)).report.map;
  };
  const double m1 = toy_map(5);
  const double m2 = toy_map(5);
  const bool ok = oracle_run.report.map == 1.0 && oracle_run.report.confusion.is_diagonal() && m1 == m2 &&
                  std::isfinite(m1);
  return {ok, fmt("oracle mAP %.4f, confusion %s, %zu instances; toy classifier mAP %.4f (rerun %.4f)",
                  oracle_run.report.map, oracle_run.report.confusion.is_diagonal() ? "diagonal" : "off-diagonal",
                  oracle_run.ground_truth.size(), m1, m2)};
}

}  // namespace

// --report-only: exit 0 when every criterion ran to a verdict, even a FAIL.
// Exceptions still fail the run.
int main(int argc, char** argv) {
  const bool report_only = argc > 1 && std::string(argv[1]) == "--report-only";
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient fidelity", gradient_fidelity},
      {"loss sweep direction", loss_sweep_direction},
      {"direct fit convergence", direct_fit_convergence},
      {"CSN index list example", csn_index_example},
      {"apportionment improves child accuracy", apportionment_direction},
      {"reconstitution enriches mislabeled samples", reconstitution_enrichment},
      {"training on reconstituted data", reconstituted_training},
      {"metric oracles", metric_oracles},
      {"uncertainty algebra", uncertainty_algebra},
      {"end-to-end sanity", end_to_end},
  };
  int failures = 0;
  int errors = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
      ++errors;
    }
    failures += !o.pass;
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", n - failures, n);
  if (report_only) return errors == 0 ? 0 : 1;
  return failures == 0 ? 0 : 1;
}
