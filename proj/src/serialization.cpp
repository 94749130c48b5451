#include "tllarch/serialization.hpp"

#include <fstream>
#include <memory>

#include "tllarch/error.hpp"
#include "tllarch/hexfloat.hpp"

namespace tllarch {

nlohmann::json box_to_json(const Box& box) {
  return {{"lower", hex_array(box.lower)}, {"upper", hex_array(box.upper)}};
}

Box box_from_json(const nlohmann::json& doc) {
  try {
    return Box(vec_from_json(doc.at("lower")), vec_from_json(doc.at("upper")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

nlohmann::json grid_to_json(const EtaGrid& grid) {
  return {{"eta", to_hexfloat(grid.eta())},
          {"anchor", hex_array(grid.anchor())},
          {"dimension", grid.dim()},
          {"offsets", grid.offsets()},
          {"domain", box_to_json(grid.domain())}};
}

EtaGrid grid_from_json(const nlohmann::json& doc) {
  try {
    const double eta = json_to_double(doc.at("eta"));
    Vec anchor = vec_from_json(doc.at("anchor"));
    const auto dim = doc.at("dimension").get<std::size_t>();
    auto offsets = doc.at("offsets").get<std::vector<IndexVec>>();
    Box domain = box_from_json(doc.at("domain"));
    if (anchor.size() != dim || domain.dim() != dim) {
      throw Error(ErrorCode::SchemaError, "grid dimension does not match anchor or domain");
    }
    return EtaGrid(eta, std::move(anchor), std::move(offsets), std::move(domain));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

nlohmann::json interpolant_to_json(const CpwaInterpolant& interp) {
  nlohmann::json omega = nlohmann::json::array();
  for (const auto& row : interp.omega().values) omega.push_back(hex_array(row));
  nlohmann::json extras = nlohmann::json::array();
  const auto& ex = interp.tiling().extras();
  for (std::size_t e = 0; e < ex.size(); ++e) {
    Vec values;
    for (std::size_t j = 0; j < interp.outputs(); ++j) values.push_back(interp.extra_values()[j][e]);
    extras.push_back({{"offset", ex[e].offset}, {"values", hex_array(values)}});
  }
  return {{"grid", grid_to_json(interp.tiling().grid())},
          {"omega", omega},
          {"extra_corners", extras},
          {"K_cont", to_hexfloat(interp.k_cont())}};
}

CpwaInterpolant interpolant_from_json(const nlohmann::json& doc, int max_dim) {
  try {
    auto tiling = std::make_shared<const Tiling>(grid_from_json(doc.at("grid")), max_dim);
    OmegaVector omega;
    for (const auto& row : doc.at("omega")) omega.values.push_back(vec_from_json(row));
    const double k_cont = json_to_double(doc.at("K_cont"));
    const auto& ex = doc.at("extra_corners");
    const auto& expected = tiling->extras();
    if (ex.size() != expected.size()) throw Error(ErrorCode::InvariantViolation, "extra-corner count mismatch");
    std::vector<Vec> extra_values(omega.outputs(), Vec(expected.size()));
    for (std::size_t e = 0; e < expected.size(); ++e) {
      if (ex[e].at("offset").get<IndexVec>() != expected[e].offset) {
        throw Error(ErrorCode::InvariantViolation, "extra corner " + std::to_string(e) + " is misplaced");
      }
      const Vec values = vec_from_json(ex[e].at("values"));
      if (values.size() != omega.outputs()) throw Error(ErrorCode::InvariantViolation, "extra-corner value count");
      for (std::size_t j = 0; j < omega.outputs(); ++j) extra_values[j][e] = values[j];
    }
    return CpwaInterpolant(std::move(tiling), std::move(omega), std::move(extra_values), k_cont);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace tllarch
