#include <gtest/gtest.h>

#include "glomkit/errors.hpp"
#include "glomkit/labels.hpp"

namespace glom {
namespace {

TEST(Labels, HierarchyRoundTrip) {
  for (Lesion l : kAllLesions) {
    EXPECT_EQ(lesion_from(parent_of(l), child_of(l)), l);
    EXPECT_EQ(parse_lesion(to_string(l)), l);
  }
  EXPECT_EQ(parent_of(Lesion::SS), ParentClass::CSN);
  EXPECT_FALSE(child_of(Lesion::GS).has_value());
  EXPECT_EQ(lesion_of(ChildClass::NoA), Lesion::NoA);
}

TEST(Labels, ParsersRejectUnknownNames) {
  EXPECT_THROW(parse_lesion("GGS"), ValidationError);
  EXPECT_THROW(parse_parent("C"), ValidationError);
  EXPECT_THROW(parse_child("Neg"), ValidationError);
  EXPECT_EQ(parse_parent("CSN"), ParentClass::CSN);
  EXPECT_EQ(parse_child("SS"), ChildClass::SS);
}

TEST(Labels, CsnNeedsChild) { EXPECT_THROW(lesion_from(ParentClass::CSN, std::nullopt), ValidationError); }

}  // namespace
}  // namespace glom
