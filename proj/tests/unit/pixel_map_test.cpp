#include <gtest/gtest.h>

#include "glomkit/errors.hpp"
#include "glomkit/pixel_map.hpp"

namespace glom {
namespace {

TEST(PixelMap, RowMajorIndexing) {
  PixelMap m(3, 2, std::vector<double>{0, 1, 2, 3, 4, 5});
  EXPECT_EQ(m(2, 0), 2.0);
  EXPECT_EQ(m(0, 1), 3.0);
  m(1, 1) = 9.0;
  EXPECT_EQ(m.values()[4], 9.0);
}

TEST(PixelMap, Reductions) {
  PixelMap m(2, 2, std::vector<double>{1, -2, 3, 0.5});
  EXPECT_DOUBLE_EQ(m.sum(), 2.5);
  EXPECT_EQ(m.min(), -2.0);
  EXPECT_EQ(m.max(), 3.0);
}

TEST(PixelMap, RejectsBadShapes) {
  EXPECT_THROW(PixelMap(-1, 2), ValidationError);
  EXPECT_THROW(PixelMap(2, 2, std::vector<double>{1, 2, 3}), ValidationError);
  EXPECT_THROW(PixelMap().min(), ValidationError);
  EXPECT_THROW(require_same_shape(PixelMap(2, 3), PixelMap(3, 2), "t"), ValidationError);
}

TEST(Box, InclusiveBounds) {
  const Box b{2, 3, 4, 3};
  EXPECT_EQ(b.width(), 3);
  EXPECT_EQ(b.height(), 1);
  EXPECT_EQ(b.area(), 3);
  EXPECT_TRUE(b.contains(4, 3));
  EXPECT_FALSE(b.contains(5, 3));
  EXPECT_EQ((Box{3, 0, 2, 0}).area(), 0);
}

}  // namespace
}  // namespace glom
