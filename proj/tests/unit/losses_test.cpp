#include <gtest/gtest.h>

#include <cmath>

#include "glomkit/errors.hpp"
#include "glomkit/losses.hpp"
#include "oracles.hpp"

namespace glom {
namespace {

struct Case {
  PixelMap p;
  PixelMap g;
  InstanceSet inst;
};

Case disc_case(std::uint64_t seed, bool with_instances = true) {
  SceneSpec spec;
  spec.width = 40;
  spec.height = 36;
  if (with_instances) spec.objects = {{12, 12, 6}, {28, 24, 7}};
  const SceneSample s = circle_scene(spec);
  return {oracle::random_map(40, 36, seed, 0.05, 0.95), s.mask, s.instances};
}

TEST(DiceLoss, Values) {
  const PixelMap ones(4, 4, 1.0);
  EXPECT_NEAR(dice_loss(ones, ones).value, 0.0, 1e-12);
  const PixelMap zeros(4, 4);
  EXPECT_NEAR(dice_loss(zeros, ones, 0.0).value, 1.0, 1e-12);
  EXPECT_EQ(dice_loss(zeros, zeros, 0.0).value, 0.0);
  EXPECT_EQ(dice_loss(zeros, zeros, 1.0).value, 0.0);
  // p = 0.5 everywhere, half the pixels positive: 1 - (8 + 1) / (8 + 8 + 1)
  PixelMap g(4, 4);
  for (int x = 0; x < 4; ++x) g(x, 0) = g(x, 1) = 1.0;
  EXPECT_NEAR(dice_loss(PixelMap(4, 4, 0.5), g).value, 1.0 - 9.0 / 17.0, 1e-12);
}

TEST(FocalLoss, HalfProbabilityPositivePixel) {
  const double v = focal_loss(PixelMap(1, 1, 0.5), PixelMap(1, 1, 1.0)).value;
  EXPECT_NEAR(v, 0.0433, 1e-4);
  EXPECT_NEAR(v, 0.25 * 0.25 * std::log(2.0), 1e-12);
}

TEST(FocalLoss, ClampKeepsExtremesFinite) {
  const LossResult r = focal_loss(PixelMap(2, 1, {0.0, 1.0}), PixelMap(2, 1, {1.0, 0.0}));
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_NEAR(r.value, (0.25 + 0.75) * -std::log(1e-7) * std::pow(1 - 1e-7, 2) / 2, 1e-6);
  EXPECT_EQ(r.gradient(0, 0), 0.0);
}

TEST(FocalLoss, GammaZeroIsWeightedCrossEntropy) {
  const PixelMap p(3, 1, {0.2, 0.7, 0.9});
  const PixelMap g(3, 1, {0.0, 1.0, 0.0});
  const double expected = -(0.75 * std::log(0.8) + 0.25 * std::log(0.7) + 0.75 * std::log(0.1)) / 3;
  EXPECT_NEAR(focal_loss(p, g, {0.25, 0.0}).value, expected, 1e-12);
}

TEST(TverskyLoss, SymmetricWeightsEqualDiceWithoutSmoothing) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PixelMap p = oracle::random_map(9, 7, seed);
    const PixelMap g = oracle::random_mask(9, 7, seed + 10, 0.4);
    EXPECT_NEAR(tversky_loss(p, g, 0.5, 0.5, 0.0).value, dice_loss(p, g, 0.0).value, 1e-12);
  }
}

TEST(TverskyLoss, PenalizesFalseNegativesLessWithDefaultWeights) {
  PixelMap g(10, 1);
  for (int x = 0; x < 5; ++x) g(x, 0) = 1.0;
  PixelMap over = g;
  over(5, 0) = 1.0;  // one FP
  PixelMap under = g;
  under(4, 0) = 0.0;  // one FN
  EXPECT_GT(tversky_loss(over, g, 0.7, 0.3).value, tversky_loss(under, g, 0.7, 0.3).value);
}

TEST(IssLoss, PerfectPredictionIsZero) {
  const Case c = disc_case(1);
  EXPECT_NEAR(iss_loss(c.g, c.g, c.inst).value, 0.0, 1e-12);
  const Case bg = disc_case(1, false);
  EXPECT_NEAR(iss_loss(bg.g, bg.g, bg.inst).value, 0.0, 1e-12);
}

TEST(IssComponents, ExactlyOneSet) {
  const Case c = disc_case(2);
  const IssComponents pos = iss_components(c.p, c.g, c.inst);
  EXPECT_TRUE(pos.iss_p.has_value());
  EXPECT_FALSE(pos.iss_n.has_value());
  EXPECT_NEAR(1.0 - *pos.iss_p, iss_loss(c.p, c.g, c.inst).value, 1e-12);

  const Case bg = disc_case(2, false);
  const IssComponents neg = iss_components(bg.p, bg.g, bg.inst);
  EXPECT_FALSE(neg.iss_p.has_value());
  ASSERT_TRUE(neg.iss_n.has_value());
  EXPECT_NEAR(1.0 - *neg.iss_n, iss_loss(bg.p, bg.g, bg.inst).value, 1e-12);
}

TEST(IssComponents, PositiveTermIsMeanOverBoxCrops) {
  const Case c = disc_case(3);
  double sum = 0.0;
  for (const Box& b : c.inst.boxes) sum += windowed_ssim(crop_padded(c.p, b, 11), crop_padded(c.g, b, 11));
  EXPECT_NEAR(*iss_components(c.p, c.g, c.inst).iss_p, sum / c.inst.count(), 1e-12);
}

TEST(IssComponents, NegativeTermIsWorstPatch) {
  const Case bg = disc_case(4, false);
  double worst = 2.0;
  for (const Box& b : {Box{0, 0, 19, 17}, Box{20, 0, 39, 17}, Box{0, 18, 19, 35}, Box{20, 18, 39, 35}}) {
    worst = std::min(worst, windowed_ssim(crop_padded(bg.p, b, 11), crop_padded(bg.g, b, 11)));
  }
  EXPECT_NEAR(*iss_components(bg.p, bg.g, bg.inst).iss_n, worst, 1e-12);
}

TEST(IssLoss, IgnoresPixelsOutsideBoxes) {
  const Case c = disc_case(5);
  PixelMap q = c.p;
  q(39, 0) = 0.123;  // outside both boxes
  EXPECT_EQ(iss_loss(q, c.g, c.inst).value, iss_loss(c.p, c.g, c.inst).value);
  EXPECT_EQ(iss_loss(c.p, c.g, c.inst).gradient(39, 0), 0.0);
}

TEST(IssLoss, RejectsMismatchedInstances) {
  const Case c = disc_case(5);
  const InstanceSet other = connected_components(PixelMap(20, 20));
  EXPECT_THROW(iss_loss(c.p, c.g, other), ValidationError);
}

TEST(CompoundLosses, AreSumsOfParts) {
  const Case c = disc_case(6);
  LossConfig cfg;
  const double focal = focal_loss(c.p, c.g).value;
  const double iss = iss_loss(c.p, c.g, c.inst).value;
  const double dice = dice_loss(c.p, c.g).value;
  EXPECT_NEAR(fiss_loss(c.p, c.g, c.inst, cfg).value, focal + iss, 1e-12);
  EXPECT_NEAR(compound_dl_fiss(c.p, c.g, c.inst, cfg).value, dice + focal + iss, 1e-12);
  cfg.alpha = 2.0;
  cfg.beta = 0.5;
  EXPECT_NEAR(fiss_loss(c.p, c.g, c.inst, cfg).value, 2 * focal + 0.5 * iss, 1e-12);
}

class GradientCheck : public ::testing::TestWithParam<LossId> {};

TEST_P(GradientCheck, AnalyticMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneSpec spec;
    spec.width = 16;
    spec.height = 16;
    spec.objects = {{7.5 + seed % 3, 8.0, 3.0 + seed % 2}};
    const SceneSample s = circle_scene(spec);
    const PixelMap p = oracle::random_map(16, 16, seed, 0.05, 0.95);
    const InstanceSet none = connected_components(PixelMap(16, 16));
    EXPECT_LT(fd_gradient_check(GetParam(), p, s.mask, s.instances, {}, 1e-5, 100, seed), 1e-3)
        << to_string(GetParam()) << " seed " << seed;
    EXPECT_LT(fd_gradient_check(GetParam(), p, PixelMap(16, 16), none, {}, 1e-5, 100, seed), 1e-3)
        << to_string(GetParam()) << " background, seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllLosses, GradientCheck, ::testing::ValuesIn(kAllLossIds),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(LossIds, RoundTrip) {
  for (LossId id : kAllLossIds) EXPECT_EQ(parse_loss_id(to_string(id)), id);
  EXPECT_THROW(parse_loss_id("bce"), ValidationError);
}

TEST(SoftDice, Values) {
  EXPECT_EQ(soft_dice(PixelMap(3, 3), PixelMap(3, 3)), 1.0);
  EXPECT_NEAR(soft_dice(PixelMap(2, 1, {1.0, 0.0}), PixelMap(2, 1, {1.0, 1.0})), 2.0 / 3.0, 1e-12);
}

TEST(Losses, ShapeMismatchThrows) {
  const PixelMap a(4, 4);
  const PixelMap b(4, 5);
  EXPECT_THROW(dice_loss(a, b), ValidationError);
  EXPECT_THROW(focal_loss(a, b), ValidationError);
  EXPECT_THROW(tversky_loss(a, b, 0.7, 0.3), ValidationError);
  EXPECT_THROW(soft_dice(a, b), ValidationError);
}

}  // namespace
}  // namespace glom
