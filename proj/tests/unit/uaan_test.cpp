#include <gtest/gtest.h>

#include <cmath>

#include "glomkit/errors.hpp"
#include "glomkit/uaan.hpp"
#include "oracles.hpp"

namespace glom {
namespace {

constexpr ModelDims kSmall{3, 4, 4, 4};

ToySample make_sample(Lesion lesion, std::uint64_t seed, int id, bool fixed = false) {
  DatasetConfig cfg;
  cfg.positions = kSmall.positions;
  cfg.channels = kSmall.in_channels;
  cfg.active_positions = 1;
  cfg.distractor_positions = 1;
  ToySample s = draw_toy_sample(cfg, lesion, seed, id);
  s.is_fixed = fixed;
  return s;
}

struct Fixture {
  std::vector<ToySample> storage;
  BatchLayout batch;
  ModelParams params;

  explicit Fixture(std::uint64_t seed) {
    const Lesion order[] = {Lesion::NoA, Lesion::GS, Lesion::SS, Lesion::Neg, Lesion::C, Lesion::SS};
    storage.push_back(make_sample(Lesion::C, seed, 0, true));
    for (int i = 0; i < 6; ++i) storage.push_back(make_sample(order[i], seed + 1 + i, i + 1));
    std::vector<const ToySample*> regular;
    for (std::size_t i = 1; i < storage.size(); ++i) regular.push_back(&storage[i]);
    batch = make_batch(&storage[0], regular);
    std::mt19937_64 rng(seed);
    params = glorot_init(kSmall, rng);
    for (DenseLayer* l : params.layers())
      for (double& b : l->bias) b = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  }
};

TEST(ClassWeights, InverseFrequencyNormalized) {
  const int counts[] = {1, 1, 2};
  const auto w = class_weights(counts);
  EXPECT_NEAR(w[0], 0.4, 1e-12);
  EXPECT_NEAR(w[1], 0.4, 1e-12);
  EXPECT_NEAR(w[2], 0.2, 1e-12);
  const int zero[] = {3, 0, 1};
  EXPECT_THROW(class_weights(zero), ValidationError);
}

TEST(CsnIndexList, FixedSlotAndCsnPositions) {
  using P = ParentClass;
  // fixed, NoA, GS, SS, SS, Neg, C, Neg
  const P labels[] = {P::CSN, P::CSN, P::GS, P::CSN, P::CSN, P::Neg, P::CSN, P::Neg};
  EXPECT_EQ(build_csn_index_list(labels, true), (std::vector<int>{0, 1, 3, 4, 6}));
  const P no_csn[] = {P::Neg, P::GS};
  EXPECT_THROW(build_csn_index_list(no_csn, false), ValidationError);
  EXPECT_EQ(build_csn_index_list(no_csn, true), (std::vector<int>{0}));
}

TEST(MakeBatch, FixedSampleFirst) {
  const Fixture f(1);
  EXPECT_EQ(f.batch.size(), 7);
  EXPECT_TRUE(f.batch.samples[0]->is_fixed);
  EXPECT_EQ(f.batch.csn_indices, (std::vector<int>{0, 1, 3, 5, 6}));
}

TEST(Params, FlattenRoundTripAndCount) {
  std::mt19937_64 rng(3);
  const ModelParams p = glorot_init(kSmall, rng);
  const auto flat = flatten(p);
  EXPECT_EQ(flat.size(), p.parameter_count());
  // backbone 4x4+4, parent transform 4x4+4, head 4x3+3, same for the child
  EXPECT_EQ(p.parameter_count(), 90u);
  ModelParams q = p.zeros_like();
  unflatten(flat, q);
  EXPECT_EQ(p, q);
  EXPECT_THROW(unflatten(std::vector<double>(3), q), ValidationError);
}

TEST(Params, GlorotBoundsAndZeroBias) {
  std::mt19937_64 rng(5);
  const ModelParams p = glorot_init(ModelDims{}, rng);
  for (const DenseLayer* l : p.layers()) {
    const double limit = std::sqrt(6.0 / (l->in_dim + l->out_dim));
    for (double w : l->weight) EXPECT_LE(std::abs(w), limit);
    for (double b : l->bias) EXPECT_EQ(b, 0.0);
  }
}

TEST(Forward, MatchesPlainSingleSamplePass) {
  for (bool gated : {true, false}) {
    Fixture f(11);
    f.params.apportionment = gated;
    std::mt19937_64 rng(0);
    const ForwardOutputs fo = forward(f.batch, f.params, {}, rng);
    EXPECT_EQ(fo.gated, gated);
    for (int s = 0; s < f.batch.size(); ++s) {
      const auto ref = oracle::plain_forward(*f.batch.samples[s], f.params, false);
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(fo.parent_logits[s * 3 + k], ref.parent_logits[k], 1e-12);
    }
    for (int j = 0; j < f.batch.csn_count(); ++j) {
      const auto ref = oracle::plain_forward(*f.batch.samples[f.batch.csn_indices[j]], f.params, true);
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(fo.child_logits[j * 3 + k], ref.child_logits[k], 1e-12);
      for (int c = 0; c < kSmall.branch_channels; ++c)
        EXPECT_NEAR(fo.phi_c[j * kSmall.branch_channels + c], ref.phi_c[c], 1e-12);
    }
  }
}

TEST(Forward, UnitGateHookEqualsApportionmentOff) {
  Fixture f(12);
  std::mt19937_64 rng(0);
  ForwardOptions hook;
  hook.force_unit_gate = true;
  const ForwardOutputs a = forward(f.batch, f.params, hook, rng);
  f.params.apportionment = false;
  const ForwardOutputs b = forward(f.batch, f.params, {}, rng);
  EXPECT_EQ(a.child_logits, b.child_logits);
  for (double g : a.gate) EXPECT_EQ(g, 1.0);
}

TEST(Forward, GateInUnitInterval) {
  const Fixture f(13);
  std::mt19937_64 rng(0);
  const ForwardOutputs fo = forward(f.batch, f.params, {}, rng);
  ASSERT_EQ(fo.gate.size(), static_cast<std::size_t>(5 * kSmall.positions * kSmall.branch_channels));
  for (double g : fo.gate) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
}

TEST(Forward, DropoutScalesAreZeroOrInverseKeep) {
  const Fixture f(14);
  std::mt19937_64 rng(0);
  ForwardOptions train;
  train.training = true;
  const ForwardOutputs fo = forward(f.batch, f.params, train, rng);
  int dropped = 0;
  for (double s : fo.parent_drop) {
    EXPECT_TRUE(s == 0.0 || s == 2.0) << s;
    dropped += s == 0.0;
  }
  EXPECT_GT(dropped, 0);
  const ForwardOutputs eval = forward(f.batch, f.params, {}, rng);
  for (double s : eval.parent_drop) EXPECT_EQ(s, 1.0);
}

TEST(Forward, RejectsWrongFeatureShape) {
  Fixture f(15);
  ToySample bad = f.storage[1];
  bad.features.pop_back();
  f.batch.samples[1] = &bad;
  std::mt19937_64 rng(0);
  EXPECT_THROW(forward(f.batch, f.params, {}, rng), ValidationError);
}

double batch_loss(const Fixture& f, const ModelParams& p, const LossWeights& w, const ForwardOptions& o) {
  std::mt19937_64 rng(99);
  return loss_and_grads(forward(f.batch, p, o, rng), f.batch, p, w, o).loss;
}

void expect_gradients_match(const Fixture& f, const LossWeights& w, const ForwardOptions& o) {
  std::mt19937_64 rng(99);
  const LossAndGrads lg = loss_and_grads(forward(f.batch, f.params, o, rng), f.batch, f.params, w, o);
  const auto analytic = flatten(lg.grads);
  auto values = flatten(f.params);
  ModelParams probe = f.params;
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = 1e-6;
    const double orig = values[i];
    values[i] = orig + h;
    unflatten(values, probe);
    const double up = batch_loss(f, probe, w, o);
    values[i] = orig - h;
    unflatten(values, probe);
    const double down = batch_loss(f, probe, w, o);
    values[i] = orig;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-3}));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(LossAndGrads, FiniteDifferencesGated) {
  const Fixture f(21);
  expect_gradients_match(f, {{0.5, 0.3, 0.2}, {0.2, 0.3, 0.5}}, {});
}

TEST(LossAndGrads, FiniteDifferencesUngated) {
  Fixture f(22);
  f.params.apportionment = false;
  expect_gradients_match(f, {{0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}}, {});
}

TEST(LossAndGrads, FiniteDifferencesWithDropout) {
  const Fixture f(23);
  ForwardOptions o;
  o.training = true;
  expect_gradients_match(f, {{0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}}, o);
}

TEST(LossAndGrads, StopGradientCutsGatePath) {
  const Fixture f(24);
  const LossWeights child_only{{0, 0, 0}, {0.3, 0.3, 0.4}};
  ForwardOptions stop;
  stop.gate_stop_gradient = true;
  std::mt19937_64 rng(0);
  const ForwardOutputs fo = forward(f.batch, f.params, stop, rng);
  const LossAndGrads cut = loss_and_grads(fo, f.batch, f.params, child_only, stop);
  for (double g : cut.grads.parent_transform.weight) EXPECT_EQ(g, 0.0);
  const LossAndGrads open = loss_and_grads(fo, f.batch, f.params, child_only, {});
  double norm = 0.0;
  for (double g : open.grads.parent_transform.weight) norm += std::abs(g);
  EXPECT_GT(norm, 0.0);
}

TEST(LossAndGrads, FixedSampleExcludedFromLoss) {
  const Fixture f(25);
  const LossWeights w{{0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}};
  std::mt19937_64 rng(0);
  const ForwardOutputs fo = forward(f.batch, f.params, {}, rng);
  const LossAndGrads lg = loss_and_grads(fo, f.batch, f.params, w, {});
  double parent = 0.0;
  for (int s = 1; s < f.batch.size(); ++s) {
    const double* z = &fo.parent_logits[s * 3];
    const int y = static_cast<int>(f.batch.samples[s]->parent);
    const double lse = std::log(std::exp(z[0]) + std::exp(z[1]) + std::exp(z[2]));
    parent += w.parent[y] * (lse - z[y]);
  }
  EXPECT_NEAR(lg.parent_loss, parent / 6.0, 1e-12);
  EXPECT_NEAR(lg.loss, lg.parent_loss + lg.child_loss, 1e-15);
}

TEST(Route, ParentDecidesUnlessCsn) {
  const double neg[] = {2.0, 0.0, 1.0};
  const double child[] = {0.0, 3.0, 0.0};
  const auto [l1, c1] = route(std::span<const double, 3>(neg), std::span<const double, 3>(child));
  EXPECT_EQ(l1, Lesion::Neg);
  EXPECT_NEAR(c1, std::exp(2.0) / (std::exp(2.0) + 1 + std::exp(1.0)), 1e-12);
  const double csn[] = {0.0, 0.0, 1.0};
  const auto [l2, c2] = route(std::span<const double, 3>(csn), std::span<const double, 3>(child));
  EXPECT_EQ(l2, Lesion::SS);
  EXPECT_NEAR(c2, std::exp(3.0) / (std::exp(3.0) + 2), 1e-12);
}

TEST(Predict, UsesOwnGate) {
  const Fixture f(26);
  const ToySample& s = f.storage[3];
  const Prediction p = predict(s, f.params);
  const auto ref = oracle::plain_forward(s, f.params, true);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(p.parent_logits[k], ref.parent_logits[k], 1e-12);
    EXPECT_NEAR((*p.child_logits)[k], ref.child_logits[k], 1e-12);
  }
  EXPECT_GT(p.confidence, 1.0 / 3.0 - 1e-12);
}

}  // namespace
}  // namespace glom
