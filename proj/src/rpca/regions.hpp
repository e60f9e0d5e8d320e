#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rpca {

// Axis-aligned half-open rectangles over the upsampled feature grid.
// The default is the four half-frame slices: top, bottom, left, right.
struct RegionRect {
  int row0 = 0;
  int row1 = 0;
  int col0 = 0;
  int col1 = 0;

  int rows() const { return row1 - row0; }
  int cols() const { return col1 - col0; }
  int area() const { return rows() * cols(); }
  bool operator==(const RegionRect&) const = default;
};

struct RegionSpec {
  std::vector<RegionRect> regions;
  int grid_side = 32;

  int count() const { return static_cast<int>(regions.size()); }
  void validate() const;

  static RegionSpec default_four(int grid_side = 32);

  nlohmann::json to_json() const;
  static RegionSpec from_json(const nlohmann::json& j);
};

}  // namespace rpca
