#pragma once

#include <string>

#include "json.hpp"

#include "tllarch/types.hpp"

namespace tllarch {

/// C99 hex-float text ("%a"), which round-trips every finite double bit-exactly.
std::string to_hexfloat(double value);

/// Accepts hex-float or decimal strings, and plain JSON numbers.
double parse_hexfloat(const std::string& text);
double json_to_double(const nlohmann::json& value);

nlohmann::json hex_array(const Vec& values);
Vec vec_from_json(const nlohmann::json& array);

}  // namespace tllarch
