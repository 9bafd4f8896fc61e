#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "glomkit/instances.hpp"
#include "glomkit/losses.hpp"
#include "glomkit/metrics.hpp"
#include "glomkit/ssim.hpp"
#include "glomkit/synthgen.hpp"
#include "glomkit/uaan.hpp"

namespace {

using namespace glom;

PixelMap random_map(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  PixelMap m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m(x, y) = uni(rng);
  }
  return m;
}

SceneSample disc_scene(int size) {
  SceneSpec spec;
  spec.width = spec.height = size;
  spec.objects = {{size * 0.3, size * 0.35, size * 0.12}, {size * 0.7, size * 0.6, size * 0.16}};
  return circle_scene(spec);
}

void BM_Ssim(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PixelMap a = random_map(n, n, 1);
  const PixelMap b = random_map(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(windowed_ssim(a, b));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(128)->Arg(256);

void BM_Loss(benchmark::State& state) {
  const auto id = static_cast<LossId>(state.range(0));
  const SceneSample scene = disc_scene(128);
  const PixelMap p = random_map(128, 128, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_loss(id, p, scene.mask, scene.instances).value);
  }
  state.SetLabel(std::string(to_string(id)));
}
BENCHMARK(BM_Loss)->DenseRange(0, 6);

void BM_ConnectedComponents(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(4);
  std::bernoulli_distribution fg(0.45);
  PixelMap mask(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) mask(x, y) = fg(rng) ? 1.0 : 0.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(connected_components(mask).count());
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_ConnectedComponents)->Arg(128)->Arg(512);

struct UaanFixture {
  ToyDataset data = hierarchy_dataset(DatasetConfig::balanced(8), 5, 0.0);
  ModelParams params;
  BatchLayout batch;
  std::vector<const ToySample*> regular;

  UaanFixture() {
    std::mt19937_64 rng(6);
    params = glorot_init(ModelDims{}, rng);
    for (int i = 0; i < 8; ++i) regular.push_back(&data.samples[i * 5 % data.samples.size()]);
    batch = make_batch(&data.fixed.front(), regular);
  }
};

void BM_UaanForward(benchmark::State& state) {
  UaanFixture f;
  std::mt19937_64 rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(forward(f.batch, f.params, {true}, rng).parent_logits);
}
BENCHMARK(BM_UaanForward);

void BM_UaanForwardBackward(benchmark::State& state) {
  UaanFixture f;
  std::mt19937_64 rng(7);
  const LossWeights weights = pool_weights(f.data.samples);
  const ForwardOptions options{true};
  for (auto _ : state) {
    const ForwardOutputs out = forward(f.batch, f.params, options, rng);
    benchmark::DoNotOptimize(loss_and_grads(out, f.batch, f.params, weights, options).loss);
  }
}
BENCHMARK(BM_UaanForwardBackward);

void BM_AveragePrecision(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pos(0, 900);
  std::uniform_int_distribution<int> scene(0, 9);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::vector<GroundTruthBox> gts;
  std::vector<DetectionRecord> preds;
  for (int i = 0; i < n; ++i) {
    const int x = pos(rng), y = pos(rng);
    const std::string id = "s" + std::to_string(scene(rng));
    gts.push_back({id, {x, y, x + 40, y + 40}, Lesion::NoA});
    preds.push_back({id, {x + 3, y - 2, x + 42, y + 37}, Lesion::NoA, conf(rng)});
    const int fx = pos(rng), fy = pos(rng);
    preds.push_back({id, {fx, fy, fx + 40, fy + 40}, Lesion::NoA, conf(rng)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(average_precision(preds, gts, Lesion::NoA));
}
BENCHMARK(BM_AveragePrecision)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
