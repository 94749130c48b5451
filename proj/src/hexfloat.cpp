#include "tllarch/hexfloat.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>

#include "tllarch/error.hpp"

namespace tllarch {

std::string to_hexfloat(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", value);
  return buf;
}

double parse_hexfloat(const std::string& text) {
  if (text.empty()) throw Error(ErrorCode::SchemaError, "empty numeric string");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE) {
    throw Error(ErrorCode::SchemaError, "malformed float '" + text + "'");
  }
  return v;
}

double json_to_double(const nlohmann::json& value) {
  if (value.is_string()) return parse_hexfloat(value.get<std::string>());
  if (value.is_number()) return value.get<double>();
  throw Error(ErrorCode::SchemaError, "expected a number or hex-float string, got " + value.dump());
}

nlohmann::json hex_array(const Vec& values) {
  auto arr = nlohmann::json::array();
  for (double v : values) arr.push_back(to_hexfloat(v));
  return arr;
}

Vec vec_from_json(const nlohmann::json& array) {
  if (!array.is_array()) throw Error(ErrorCode::SchemaError, "expected an array, got " + array.dump());
  Vec out;
  out.reserve(array.size());
  for (const auto& v : array) out.push_back(json_to_double(v));
  return out;
}

}  // namespace tllarch
