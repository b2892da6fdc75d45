#include "qkd/tables.hpp"

#include <sstream>

#include <json.hpp>

#include "qkd/attack.hpp"
#include "qkd/io.hpp"

namespace qkd {

TableFormat parse_table_format(const std::string& name) {
  if (name == "text") return TableFormat::Text;
  if (name == "csv") return TableFormat::Csv;
  if (name == "json-lines") return TableFormat::JsonLines;
  throw ConfigError("unknown format '" + name + "' (expected text, csv, json-lines)");
}

std::string render(const Table& table, TableFormat format) {
  std::ostringstream out;
  switch (format) {
    case TableFormat::Text: {
      out << "# " << table.name << "\n";
      for (std::size_t c = 0; c < table.columns.size(); ++c)
        out << (c ? "  " : "") << table.columns[c];
      out << "\n";
      for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "  " : "") << row[c];
        out << "\n";
      }
      break;
    }
    case TableFormat::Csv: {
      for (std::size_t c = 0; c < table.columns.size(); ++c)
        out << (c ? "," : "") << table.columns[c];
      out << "\n";
      for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
        out << "\n";
      }
      break;
    }
    case TableFormat::JsonLines: {
      for (const auto& row : table.rows) {
        nlohmann::json obj;
        obj["table"] = table.name;
        for (std::size_t c = 0; c < table.columns.size(); ++c) obj[table.columns[c]] = row[c];
        out << obj.dump() << "\n";
      }
      break;
    }
  }
  return out.str();
}

std::string render(const std::vector<Table>& tables, TableFormat format) {
  std::string out;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (i && format != TableFormat::JsonLines) out += "\n";
    out += render(tables[i], format);
  }
  return out;
}

namespace {

void append_state_rows(Table& table, const std::vector<std::string>& prefix,
                       const StateVector& s) {
  const StateVector c = s.canonical();
  for (int i = 0; i < c.space().dim(); ++i) {
    const Complex a = c.amps()[i];
    if (std::abs(a) <= kSupportTol) continue;
    auto row = prefix;
    row.push_back(to_string(c.space().at(i)));
    row.push_back(fmt12(a.real()));
    row.push_back(fmt12(a.imag()));
    table.rows.push_back(std::move(row));
  }
}

}  // namespace

Table reversal_table(const ComposedApparatus& app) {
  Table t{"reversal", {"detector", "meaning", "component", "re", "im"}, {}};
  for (int d = 0; d < app.detector_count(); ++d) {
    StateVector rev = adjoint_apply(app.iso, app.detector_states[d]);
    append_state_rows(t, {app.detector_label(d), to_string(app.apparatus.outcome_map[d])},
                      rev);
  }
  return t;
}

Table outcome_table(const ComposedApparatus& app) {
  Table t{"outcome-map", {"detector", "meaning"}, {}};
  for (int d = 0; d < app.detector_count(); ++d)
    t.rows.push_back({app.detector_label(d), to_string(app.apparatus.outcome_map[d])});
  return t;
}

Table statistics_table(const ProtocolScheme& scheme) {
  Table t{"statistics", {"alice", "meaning", "probability"}, {}};
  const auto& app = scheme.composed;
  for (const auto& [alice, state] : scheme.alice_states) {
    OutcomeDistribution dist = analytic_distribution(scheme, state);
    std::vector<double> per_meaning(app.meanings.size(), 0.0);
    double inconclusive = dist.p_no_click;
    for (int d = 0; d < app.detector_count(); ++d) {
      if (app.detector_meaning[d] >= 0)
        per_meaning[app.detector_meaning[d]] += dist.p_detector[d];
      else
        inconclusive += dist.p_detector[d];
    }
    for (std::size_t m = 0; m < per_meaning.size(); ++m)
      t.rows.push_back(
          {to_string(alice), to_string(app.meanings[m]), fmt12(per_meaning[m])});
    if (inconclusive > kSupportTol)
      t.rows.push_back({to_string(alice), "inconclusive", fmt12(inconclusive)});
  }
  return t;
}

Table restricted_attack_table(const ProtocolScheme& scheme) {
  Table t{"restricted-attack", {"meaning", "component", "re", "im"}, {}};
  AttackPlan plan = synthesize_grouped(scheme.composed, protocol_restriction(scheme),
                                       "protocol-modes");
  for (const auto& e : plan.entries) append_state_rows(t, {e.key}, e.inject);
  for (const auto& key : plan.unsolved) t.rows.push_back({key, "unsolved", "", ""});
  return t;
}

std::string describe_apparatus(const ComposedApparatus& app) {
  std::ostringstream out;
  out << "apparatus: " << app.apparatus.name << "\n";
  out << "input dimension: " << app.domain().dim() << "\n";
  out << "output dimension: " << app.codomain().dim() << "\n";
  out << "input basis:";
  for (const auto& b : app.domain().basis()) out << " " << to_string(b);
  out << "\noutput basis:";
  for (const auto& b : app.codomain().basis()) out << " " << to_string(b);
  out << "\ndetectors:";
  for (int d = 0; d < app.detector_count(); ++d)
    out << " " << app.detector_label(d) << "->" << to_string(app.apparatus.outcome_map[d]);
  out << "\nbasis-space overlap: " << fmt12(basis_space_overlap(app)) << "\n";
  out << "matrix (row per output basis state, entries [re,im]):\n";
  const auto& m = app.iso.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << to_string(app.codomain().at(static_cast<int>(r))) << ":";
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out << " [" << fmt12(m(r, c).real()) << "," << fmt12(m(r, c).imag()) << "]";
    out << "\n";
  }
  return out.str();
}

}  // namespace qkd
