#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "glomkit/errors.hpp"
#include "glomkit/uaan.hpp"

namespace glom {
namespace {

struct Adam {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  void update(ModelParams& params, const ModelParams& grads, const TrainConfig& cfg, double lr) {
    if (m.empty()) {
      m.assign(params.parameter_count(), 0.0);
      v.assign(params.parameter_count(), 0.0);
    }
    ++step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    std::size_t k = 0;
    auto apply = [&](std::vector<double>& w, const std::vector<double>& gw) {
      for (std::size_t i = 0; i < w.size(); ++i, ++k) {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gw[i];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gw[i] * gw[i];
        w[i] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
      }
    };
    auto layers = params.layers();
    auto grad_layers = grads.layers();
    for (int l = 0; l < kNumLayers; ++l) {
      apply(layers[l]->weight, grad_layers[l]->weight);
      apply(layers[l]->bias, grad_layers[l]->bias);
    }
  }
};

}  // namespace

LossWeights pool_weights(std::span<const ToySample> pool) {
  std::vector<int> parent(kNumParent, 0), child(kNumChild, 0);
  for (const ToySample& s : pool) {
    ++parent[static_cast<int>(s.parent)];
    if (s.child) ++child[static_cast<int>(*s.child)];
  }
  return {class_weights(parent), class_weights(child)};
}

ClassificationScores score(std::span<const ToySample> samples, const ModelParams& params) {
  ClassificationScores out;
  require(!samples.empty(), "score: no samples");
  bool any_child = false;
  for (const ToySample& s : samples) {
    const Prediction p = predict(s, params);
    out.confusion.add(static_cast<int>(s.lesion()), static_cast<int>(p.label));
    if (s.parent == ParentClass::CSN && s.child) {
      const auto& cl = *p.child_logits;
      const int pred = static_cast<int>(std::max_element(cl.begin(), cl.end()) - cl.begin());
      out.child_confusion.add(static_cast<int>(*s.child), pred);
      any_child = true;
    }
  }
  std::tie(out.acc_micro, out.acc_macro) = accuracy(out.confusion);
  if (any_child) out.child_acc_macro = accuracy(out.child_confusion).second;
  return out;
}

TrainResult train(const ToyDataset& dataset, const TrainConfig& cfg, const ToyDataset* eval) {
  require(cfg.epochs >= 0, "train: negative epoch count");
  require(cfg.batch_size >= 2, "train: batch_size must leave room for a fixed sample");
  require(cfg.learning_rate > 0.0, "train: learning rate must be positive");
  require(dataset.fixed.size() == kNumChild, "train: dataset must carry exactly 3 fixed samples");
  require(!dataset.samples.empty(), "train: empty training pool");
  for (const ToySample& f : dataset.fixed) {
    require(f.is_fixed && f.parent == ParentClass::CSN, "train: fixed samples must be CSN");
  }

  ModelDims dims = cfg.dims;
  dims.positions = dataset.positions;
  dims.in_channels = dataset.channels;

  std::mt19937_64 rng(cfg.seed);
  TrainResult result{glorot_init(dims, rng), {}};
  ModelParams& params = result.params;
  params.apportionment = cfg.apportionment;
  params.dropout_rate = cfg.dropout_rate;

  const LossWeights weights = pool_weights(dataset.samples);
  Adam adam;
  std::vector<std::size_t> order(dataset.samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t regular_per_batch = static_cast<std::size_t>(cfg.batch_size - 1);
  std::uniform_int_distribution<std::size_t> pick_fixed(0, dataset.fixed.size() - 1);
  const ForwardOptions options{.training = true};
  std::vector<const ToySample*> regular;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += regular_per_batch) {
      const std::size_t end = std::min(order.size(), start + regular_per_batch);
      regular.clear();
      for (std::size_t i = start; i < end; ++i) regular.push_back(&dataset.samples[order[i]]);
      const ToySample* fixed = &dataset.fixed[pick_fixed(rng)];
      const BatchLayout batch = make_batch(fixed, regular);
      const ForwardOutputs fo = forward(batch, params, options, rng);
      LossAndGrads lg = loss_and_grads(fo, batch, params, weights, options);
      if (!std::isfinite(lg.loss)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batches));
      }
      adam.update(params, lg.grads, cfg, lr);
      loss_sum += lg.loss;
      ++batches;
    }
    const ClassificationScores s = score(eval ? std::span<const ToySample>(eval->samples)
                                              : std::span<const ToySample>(dataset.samples),
                                         params);
    result.history.push_back({epoch, batches ? loss_sum / batches : 0.0, s.acc_micro, s.acc_macro});
  }
  return result;
}

}  // namespace glom
