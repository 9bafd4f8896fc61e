#include <gtest/gtest.h>

#include <cmath>

#include "glomkit/errors.hpp"
#include "glomkit/losses.hpp"

namespace glom {
namespace {

SceneSample small_scene() {
  SceneSpec spec;
  spec.width = 32;
  spec.height = 32;
  spec.objects = {{16, 16, 8}};
  return circle_scene(spec);
}

TEST(DirectFit, ZeroStepsLeavesHalfMap) {
  const SceneSample s = small_scene();
  const FitResult r = direct_fit(s, LossId::Dice, 0, 0.1);
  EXPECT_TRUE(r.dice_trace.empty());
  EXPECT_EQ(r.prediction, PixelMap(32, 32, 0.5));
  const double g = s.mask.sum();
  EXPECT_NEAR(soft_dice(r.prediction, s.mask), g / (0.5 * 1024 + g), 1e-12);
}

TEST(DirectFit, DiceImprovesUnderEveryLoss) {
  const SceneSample s = small_scene();
  const double start = soft_dice(PixelMap(32, 32, 0.5), s.mask);
  for (LossId id : kAllLossIds) {
    const FitResult r = direct_fit(s, id, 40, 0.5);
    ASSERT_EQ(r.dice_trace.size(), 40u);
    EXPECT_GT(r.dice_trace.back(), start) << to_string(id);
    EXPECT_DOUBLE_EQ(r.dice_trace.back(), soft_dice(r.prediction, s.mask));
  }
}

TEST(DirectFit, CompoundReachesNearPerfectOverlap) {
  const FitResult r = direct_fit(small_scene(), LossId::Compound, 300, 0.5);
  EXPECT_GT(r.dice_trace.back(), 0.95);
}

TEST(DirectFit, TraceSettlesOverFinalTenthOfSteps) {
  for (LossId id : kAllLossIds) {
    const FitResult r = direct_fit(small_scene(), id, 200, 0.5);
    const std::size_t tail = r.dice_trace.size() - r.dice_trace.size() / 10;
    for (std::size_t i = tail; i < r.dice_trace.size(); ++i) {
      EXPECT_GE(r.dice_trace[i], r.dice_trace[i - 1] - 0.01) << to_string(id) << " step " << i;
    }
  }
}

TEST(DirectFit, RejectsBadArguments) {
  const SceneSample s = small_scene();
  EXPECT_THROW(direct_fit(s, LossId::Dice, -1, 0.1), ValidationError);
  EXPECT_THROW(direct_fit(s, LossId::Dice, 1, 0.0), ValidationError);
  EXPECT_THROW(direct_fit(s, LossId::Dice, 1, INFINITY), ValidationError);
}

}  // namespace
}  // namespace glom
