#pragma once

#include <string>

#include <json.hpp>

#include "qkd/hilbert.hpp"

namespace qkd {

/// Locale-independent number formatting at 12 significant digits.
/// Magnitudes below the support tolerance print as 0.
std::string fmt12(double v);

// State serialization: a JSON array of [label, [re, im]] pairs covering the
// whole basis in canonical order, with the global phase canonicalized.
nlohmann::json state_to_json(const StateVector& s);
StateVector state_from_json(const nlohmann::json& j);

std::string serialize_state(const StateVector& s);
StateVector parse_state(const std::string& text);

}  // namespace qkd
