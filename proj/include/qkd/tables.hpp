#pragma once

#include <string>
#include <vector>

#include "qkd/protocol.hpp"

namespace qkd {

/// A small rectangular table of preformatted cells.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

enum class TableFormat { Text, Csv, JsonLines };
TableFormat parse_table_format(const std::string& name);

std::string render(const Table& table, TableFormat format);
std::string render(const std::vector<Table>& tables, TableFormat format);

/// Reversed detector states, one row per nonzero component:
/// detector, meaning, component, re, im.
Table reversal_table(const ComposedApparatus& app);

/// detector, meaning.
Table outcome_table(const ComposedApparatus& app);

/// Exact outcome probabilities per Alice state: alice, meaning, probability.
Table statistics_table(const ProtocolScheme& scheme);

/// Grouped attack restricted to the protocol's legitimate input modes:
/// meaning, component, re, im.
Table restricted_attack_table(const ProtocolScheme& scheme);

/// Input-space basis, output-space basis, and the apparatus matrix.
std::string describe_apparatus(const ComposedApparatus& app);

}  // namespace qkd
