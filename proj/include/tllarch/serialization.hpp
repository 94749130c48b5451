#pragma once

#include <string>

#include "json.hpp"

#include "tllarch/cpwa.hpp"
#include "tllarch/geometry.hpp"

namespace tllarch {

nlohmann::json box_to_json(const Box& box);
Box box_from_json(const nlohmann::json& doc);

/// {eta, anchor, dimension, offsets, domain:{lower, upper}}; reals as hex-floats.
nlohmann::json grid_to_json(const EtaGrid& grid);
EtaGrid grid_from_json(const nlohmann::json& doc);

/// {grid, omega, extra_corners:[{offset, values}], K_cont}.
nlohmann::json interpolant_to_json(const CpwaInterpolant& interp);
/// Rebuilds the tiling and pieces. The stored extra-corner values are used
/// as given, after checking that they sit at the rebuilt extra corners.
CpwaInterpolant interpolant_from_json(const nlohmann::json& doc, int max_dim = kDefaultMaxDimension);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& doc);

}  // namespace tllarch
