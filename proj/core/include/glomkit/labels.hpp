#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace glom {

/// Five fine-grained glomerulus categories.
enum class Lesion { Neg = 0, GS = 1, C = 2, SS = 3, NoA = 4 };

/// Coarse classes of the parent branch. CSN pools C, SS and NoA.
enum class ParentClass { Neg = 0, GS = 1, CSN = 2 };

/// Fine classes of the child branch.
enum class ChildClass { C = 0, SS = 1, NoA = 2 };

inline constexpr int kNumLesions = 5;
inline constexpr int kNumParent = 3;
inline constexpr int kNumChild = 3;

inline constexpr std::array<Lesion, kNumLesions> kAllLesions = {
    Lesion::Neg, Lesion::GS, Lesion::C, Lesion::SS, Lesion::NoA};

/// Classes that appear as detections on a slide.
inline constexpr std::array<Lesion, 4> kDetectionClasses = {
    Lesion::NoA, Lesion::SS, Lesion::GS, Lesion::C};

ParentClass parent_of(Lesion lesion);
std::optional<ChildClass> child_of(Lesion lesion);
Lesion lesion_from(ParentClass parent, std::optional<ChildClass> child);
Lesion lesion_of(ChildClass child);

std::string_view to_string(Lesion lesion);
std::string_view to_string(ParentClass parent);
std::string_view to_string(ChildClass child);

// Parsers throw ValidationError on unknown names.
Lesion parse_lesion(std::string_view name);
ParentClass parse_parent(std::string_view name);
ChildClass parse_child(std::string_view name);

}  // namespace glom
