#pragma once

#include <span>
#include <string>

#include "camlpad/error.hpp"

namespace camlpad {

// Bumped whenever a serialized model layout changes.
inline constexpr int kModelVersion = 1;

inline void check_dims(std::span<const double> row, std::size_t expected) {
  if (row.size() != expected) {
    throw Error(ErrorCode::DimensionMismatch, "row has " + std::to_string(row.size()) +
                                                  " features, model expects " +
                                                  std::to_string(expected));
  }
}

}  // namespace camlpad
