#pragma once

#include <stdexcept>
#include <string>

namespace glom {

// Bad input: shapes, ranges, empty collections, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced a non-finite value (diverging fit or training).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace glom
