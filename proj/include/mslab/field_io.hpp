#pragma once

#include <mslab/grid.hpp>

#include <json.hpp>

#include <iosfwd>

namespace mslab {

nlohmann::json grid_to_json(const Grid& g);
Grid grid_from_json(const nlohmann::json& j);

/// One row per node: i1,i2[,i3],re,im.
void write_field_csv(std::ostream& os, const Grid& g, const Field& u);
Field read_field_csv(std::istream& is, const Grid& g);

/// {"grid": {...}, "re": [...], "im": [...]}
nlohmann::json field_to_json(const Grid& g, const Field& u);
std::pair<Grid, Field> field_from_json(const nlohmann::json& j);

}  // namespace mslab
