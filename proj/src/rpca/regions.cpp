#include "rpca/regions.hpp"

#include <nlohmann/json.hpp>

#include "rpca/common.hpp"

namespace rpca {

void RegionSpec::validate() const {
  check(!regions.empty(), ErrorKind::parameter, "region spec has no regions");
  check(grid_side >= 1, ErrorKind::parameter, "region grid side must be positive");
  for (const RegionRect& r : regions) {
    check(r.rows() > 0 && r.cols() > 0, ErrorKind::parameter,
          "empty region rectangle");
    check(r.row0 >= 0 && r.col0 >= 0 && r.row1 <= grid_side && r.col1 <= grid_side,
          ErrorKind::parameter, "region rectangle out of bounds");
  }
}

RegionSpec RegionSpec::default_four(int grid_side) {
  int half = grid_side / 2;
  RegionSpec spec;
  spec.grid_side = grid_side;
  spec.regions = {
      {0, half, 0, grid_side},          // top
      {half, grid_side, 0, grid_side},  // bottom
      {0, grid_side, 0, half},          // left
      {0, grid_side, half, grid_side},  // right
  };
  return spec;
}

nlohmann::json RegionSpec::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const RegionRect& r : regions) {
    arr.push_back({r.row0, r.row1, r.col0, r.col1});
  }
  return {{"grid_side", grid_side}, {"regions", arr}};
}

RegionSpec RegionSpec::from_json(const nlohmann::json& j) {
  RegionSpec spec;
  spec.grid_side = j.at("grid_side").get<int>();
  for (const auto& r : j.at("regions")) {
    check(r.is_array() && r.size() == 4, ErrorKind::parameter,
          "region rectangle must be [row0, row1, col0, col1]");
    spec.regions.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<int>(),
                            r[3].get<int>()});
  }
  spec.validate();
  return spec;
}

}  // namespace rpca
