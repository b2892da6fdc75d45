#include "qkd/io.hpp"

#include <charconv>
#include <cmath>

namespace qkd {

std::string fmt12(double v) {
  if (std::abs(v) < kSupportTol) v = 0.0;
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

nlohmann::json state_to_json(const StateVector& s) {
  StateVector c = s.canonical();
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < c.space().dim(); ++i) {
    const Complex a = c.amps()[i];
    arr.push_back({to_string(c.space().at(i)), {a.real(), a.imag()}});
  }
  return arr;
}

StateVector state_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("state must be a non-empty array");
  std::vector<BasisState> basis;
  std::vector<Complex> amps;
  for (const auto& entry : j) {
    if (!entry.is_array() || entry.size() != 2 || !entry[1].is_array() ||
        entry[1].size() != 2)
      throw ConfigError("state entry must be [label, [re, im]]");
    basis.push_back(parse_basis_state(entry[0].get<std::string>()));
    amps.emplace_back(entry[1][0].get<double>(), entry[1][1].get<double>());
  }
  LabeledSpace space(basis);  // sorts; rejects duplicates
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(space.dim());
  for (std::size_t k = 0; k < basis.size(); ++k) v[*space.index_of(basis[k])] = amps[k];
  return StateVector(std::move(space), std::move(v));
}

std::string serialize_state(const StateVector& s) { return state_to_json(s).dump(); }

StateVector parse_state(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("state parse error: ") + e.what());
  }
  return state_from_json(j);
}

}  // namespace qkd
