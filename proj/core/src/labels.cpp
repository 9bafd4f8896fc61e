#include "glomkit/labels.hpp"

#include <string>

#include "glomkit/errors.hpp"

namespace glom {

ParentClass parent_of(Lesion lesion) {
  switch (lesion) {
    case Lesion::Neg: return ParentClass::Neg;
    case Lesion::GS: return ParentClass::GS;
    default: return ParentClass::CSN;
  }
}

std::optional<ChildClass> child_of(Lesion lesion) {
  switch (lesion) {
    case Lesion::C: return ChildClass::C;
    case Lesion::SS: return ChildClass::SS;
    case Lesion::NoA: return ChildClass::NoA;
    default: return std::nullopt;
  }
}

Lesion lesion_of(ChildClass child) {
  switch (child) {
    case ChildClass::C: return Lesion::C;
    case ChildClass::SS: return Lesion::SS;
    case ChildClass::NoA: break;
  }
  return Lesion::NoA;
}

Lesion lesion_from(ParentClass parent, std::optional<ChildClass> child) {
  switch (parent) {
    case ParentClass::Neg: return Lesion::Neg;
    case ParentClass::GS: return Lesion::GS;
    case ParentClass::CSN: break;
  }
  require(child.has_value(), "CSN sample without a child label");
  return lesion_of(*child);
}

std::string_view to_string(Lesion lesion) {
  switch (lesion) {
    case Lesion::Neg: return "Neg";
    case Lesion::GS: return "GS";
    case Lesion::C: return "C";
    case Lesion::SS: return "SS";
    case Lesion::NoA: return "NoA";
  }
  return "?";
}

std::string_view to_string(ParentClass parent) {
  switch (parent) {
    case ParentClass::Neg: return "Neg";
    case ParentClass::GS: return "GS";
    case ParentClass::CSN: return "CSN";
  }
  return "?";
}

std::string_view to_string(ChildClass child) { return to_string(lesion_of(child)); }

Lesion parse_lesion(std::string_view name) {
  for (Lesion l : kAllLesions) {
    if (to_string(l) == name) return l;
  }
  throw ValidationError("unknown class '" + std::string(name) + "'");
}

ParentClass parse_parent(std::string_view name) {
  for (ParentClass p : {ParentClass::Neg, ParentClass::GS, ParentClass::CSN}) {
    if (to_string(p) == name) return p;
  }
  throw ValidationError("unknown parent class '" + std::string(name) + "'");
}

ChildClass parse_child(std::string_view name) {
  for (ChildClass c : {ChildClass::C, ChildClass::SS, ChildClass::NoA}) {
    if (to_string(c) == name) return c;
  }
  throw ValidationError("unknown child class '" + std::string(name) + "'");
}

}  // namespace glom
