// Command-line front end: compose apparatuses, dump reversal tables,
// synthesize and verify attack plans, and run protocol sessions.
//
// Exit codes: 0 ok, 2 bad config or arguments, 3 math-consistency failure,
// 4 attack-plan verification failure.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "qkd/attack.hpp"
#include "qkd/io.hpp"
#include "qkd/protocol.hpp"
#include "qkd/tables.hpp"

namespace {

using namespace qkd;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + out_path + "'");
  out << content;
}

// Scheme resolution: a preset name, or an apparatus config file that may
// carry its own alice_states block.
ProtocolScheme load_scheme(const std::string& scheme_name, const std::string& config_path) {
  if (!scheme_name.empty() && !config_path.empty())
    throw ConfigError("give either --scheme or --config, not both");
  if (!scheme_name.empty()) return scheme_by_name(scheme_name);
  if (config_path.empty()) throw ConfigError("missing --scheme or --config");

  nlohmann::json j = load_json(config_path);
  Apparatus app = apparatus_from_json(j);
  ProtocolScheme scheme{app.name, compose(app), {}, {}};
  if (j.contains("alice_states")) {
    for (const auto& a : j.at("alice_states")) {
      Meaning m = parse_meaning(a.at("meaning").get<std::string>());
      StateVector s = state_from_json(a.at("state"));
      if (s.space() != scheme.composed.domain())
        throw ConfigError("alice state " + to_string(m) +
                          " is not expressed in the apparatus input space");
      scheme.alice_states.emplace_back(m, s);
    }
  }
  return scheme;
}

std::vector<ModeLabel> parse_mode_list(const ProtocolScheme& scheme, const std::string& spec) {
  std::vector<ModeLabel> modes;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    std::string cleaned;
    for (char c : token)
      if (c != '\'' && c != ' ') cleaned += c;  // accept t'-1 for t-1
    if (cleaned.find(':') != std::string::npos) {
      modes.push_back(parse_mode_label(cleaned));
      continue;
    }
    // Slot shorthand: apply to every input arm.
    if (cleaned.size() < 2 || cleaned[0] != 't')
      throw ConfigError("bad mode '" + token + "' (expected arm:kind or t<slot>)");
    int slot = std::stoi(cleaned.substr(1));
    for (const auto& in : scheme.composed.apparatus.inputs)
      modes.push_back(ModeLabel::time_bin(in.arm, slot));
  }
  return modes;
}

std::optional<Subspace> parse_restriction(const ProtocolScheme& scheme,
                                          const std::string& spec, std::string& label) {
  if (spec.empty() || spec == "none") return std::nullopt;
  label = spec;
  if (spec == "protocol") return protocol_restriction(scheme);
  return Subspace::from_modes(scheme.composed.domain(), parse_mode_list(scheme, spec));
}

std::vector<std::pair<StateVector, double>> uniform_source(const ProtocolScheme& scheme) {
  if (scheme.alice_states.empty())
    throw ConfigError("scheme '" + scheme.name + "' declares no alice states");
  std::vector<std::pair<StateVector, double>> source;
  for (const auto& [m, s] : scheme.alice_states)
    source.emplace_back(s, 1.0 / double(scheme.alice_states.size()));
  return source;
}

std::string verification_text(const VerificationReport& v) {
  std::string out;
  out += "deterministic: " + std::string(v.deterministic ? "yes" : "no") + "\n";
  for (const auto& d : v.determinism)
    out += "  " + d.key + ": off-target probability " + fmt12(d.off_target_probability) +
           (d.pass ? "" : "  [FAIL]") + "\n";
  out += "raw statistics preserved: " + std::string(v.raw_preserved ? "yes" : "no") +
         " (max deviation " + fmt12(v.raw_max_deviation) + ")\n";
  out += "meaning statistics preserved: " + std::string(v.coarse_preserved ? "yes" : "no") +
         " (max deviation " + fmt12(v.coarse_max_deviation) + ")\n";
  for (const auto& n : v.notes) out += "note: " + n + "\n";
  return out;
}

struct CommonArgs {
  std::string scheme;
  std::string config;
  std::string out;
  std::string format = "text";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_format = true) {
  cmd->add_option("--scheme", args.scheme, "preset scheme name");
  cmd->add_option("--config", args.config, "apparatus config file");
  cmd->add_option("--out", args.out, "output file (default stdout)");
  if (with_format) cmd->add_option("--format", args.format, "text, csv, or json-lines");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"fixed-apparatus QKD attack simulator"};
  cli.require_subcommand(1);

  CommonArgs apparatus_args, reverse_args, attack_args, verify_args, simulate_args,
      tables_args;

  auto* cmd_apparatus =
      cli.add_subcommand("apparatus", "input/output spaces and the composed matrix");
  add_common(cmd_apparatus, apparatus_args, false);

  auto* cmd_reverse = cli.add_subcommand("reverse", "reversed detector states");
  add_common(cmd_reverse, reverse_args);

  auto* cmd_attack = cli.add_subcommand("attack", "synthesize an attack plan");
  add_common(cmd_attack, attack_args, false);
  std::string attack_mode = "per-outcome";
  std::string attack_restrict;
  cmd_attack->add_option("--mode", attack_mode, "per-outcome or grouped");
  cmd_attack->add_option("--restrict", attack_restrict,
                         "grouped restriction: protocol, none, or mode list");

  auto* cmd_verify = cli.add_subcommand("verify", "verify a plan against a scheme");
  add_common(cmd_verify, verify_args, false);
  std::string verify_plan_path;
  double verify_tol = 1e-10;
  cmd_verify->add_option("--plan", verify_plan_path, "plan file")->required();
  cmd_verify->add_option("--tol", verify_tol, "determinism tolerance");

  auto* cmd_simulate = cli.add_subcommand("simulate", "run a protocol session");
  add_common(cmd_simulate, simulate_args, false);
  std::uint64_t sim_rounds = 100000;
  std::uint64_t sim_seed = 0;
  std::string sim_adversary = "none";
  std::string sim_plan_path, sim_restrict, sim_monitor, sim_csv_prefix, sim_records;
  cmd_simulate->add_option("--rounds", sim_rounds, "number of rounds");
  cmd_simulate->add_option("--seed", sim_seed, "session seed (required here or in --config)");
  cmd_simulate->add_option("--attack", sim_adversary,
                           "none, per-outcome, or grouped (synthesized on the fly)");
  cmd_simulate->add_option("--plan", sim_plan_path, "attack plan file (custom adversary)");
  cmd_simulate->add_option("--restrict", sim_restrict,
                           "restriction for --attack grouped (default protocol)");
  cmd_simulate->add_option("--monitor", sim_monitor,
                           "monitored input modes, e.g. t-1,t2 or a:t-1,b:t-1");
  cmd_simulate->add_option("--csv", sim_csv_prefix,
                           "write <prefix>-raw.csv and <prefix>-meanings.csv");
  cmd_simulate->add_option("--records", sim_records, "write per-round records CSV");

  auto* cmd_tables = cli.add_subcommand("tables", "reversal, outcome, statistics, and restricted-attack tables");
  add_common(cmd_tables, tables_args);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = cli.exit(e);
    return code == 0 ? 0 : 2;  // parse failures are config errors
  }

  try {
    if (cmd_apparatus->parsed()) {
      ProtocolScheme scheme = load_scheme(apparatus_args.scheme, apparatus_args.config);
      write_output(apparatus_args.out, describe_apparatus(scheme.composed));
    }

    if (cmd_reverse->parsed()) {
      ProtocolScheme scheme = load_scheme(reverse_args.scheme, reverse_args.config);
      Table table = reversal_table(scheme.composed);
      write_output(reverse_args.out, render(table, parse_table_format(reverse_args.format)));
    }

    if (cmd_attack->parsed()) {
      ProtocolScheme scheme = load_scheme(attack_args.scheme, attack_args.config);
      AttackPlan plan;
      if (attack_mode == "per-outcome") {
        plan = synthesize_per_outcome(scheme.composed);
      } else if (attack_mode == "grouped") {
        std::string label;
        auto restriction = parse_restriction(scheme, attack_restrict, label);
        plan = synthesize_grouped(scheme.composed, restriction, label);
      } else {
        throw ConfigError("unknown attack mode '" + attack_mode + "'");
      }
      write_output(attack_args.out, plan_to_json(plan).dump(2) + "\n");
    }

    if (cmd_verify->parsed()) {
      ProtocolScheme scheme = load_scheme(verify_args.scheme, verify_args.config);
      AttackPlan plan = plan_from_json(load_json(verify_plan_path), scheme.composed);
      if (scheme.alice_states.empty()) {
        // No honest source: determinism check only.
        std::vector<std::pair<StateVector, double>> degenerate{
            {StateVector::unit(scheme.composed.domain(), BasisState::vacuum()), 1.0}};
        VerificationReport report =
            verify_plan(plan, scheme.composed, degenerate, verify_tol);
        report.notes.push_back("no alice states configured: statistics not checked");
        write_output(verify_args.out, verification_text(report));
        if (!report.deterministic) throw PlanError("plan verification failed");
        return 0;
      }
      VerificationReport report =
          verify_plan(plan, scheme.composed, uniform_source(scheme), verify_tol);
      write_output(verify_args.out, verification_text(report));
      if (!report.ok()) throw PlanError("plan verification failed");
    }

    if (cmd_simulate->parsed()) {
      // --config accepts either an apparatus description (has "inputs") or a
      // declarative session file; flags override session-file values.
      std::string scheme_name = simulate_args.scheme;
      std::string apparatus_config = simulate_args.config;
      std::vector<double> alice_weights;
      bool seed_given = cmd_simulate->count("--seed") > 0;
      if (!simulate_args.config.empty()) {
        nlohmann::json j = load_json(simulate_args.config);
        if (!j.contains("inputs")) {
          apparatus_config.clear();
          try {
            if (scheme_name.empty()) {
              std::string s = j.at("scheme").get<std::string>();
              if (s.find(".json") != std::string::npos)
                apparatus_config = s;
              else
                scheme_name = s;
            }
            if (!cmd_simulate->count("--rounds") && j.contains("rounds"))
              sim_rounds = j.at("rounds").get<std::uint64_t>();
            if (!seed_given && j.contains("seed")) {
              sim_seed = j.at("seed").get<std::uint64_t>();
              seed_given = true;
            }
            if (!cmd_simulate->count("--attack") && j.contains("adversary"))
              sim_adversary = j.at("adversary").get<std::string>();
            if (!cmd_simulate->count("--plan") && j.contains("plan"))
              sim_plan_path = j.at("plan").get<std::string>();
            if (!cmd_simulate->count("--restrict") && j.contains("restrict"))
              sim_restrict = j.at("restrict").get<std::string>();
            if (!cmd_simulate->count("--monitor") && j.contains("monitor"))
              sim_monitor = j.at("monitor").get<std::string>();
            if (j.contains("alice_weights"))
              alice_weights = j.at("alice_weights").get<std::vector<double>>();
          } catch (const nlohmann::json::exception& e) {
            throw ConfigError("session config: " + std::string(e.what()));
          }
        }
      }
      if (!seed_given) throw ConfigError("--seed is required for simulate");
      ProtocolScheme scheme = load_scheme(scheme_name, apparatus_config);
      if (!sim_monitor.empty()) scheme.monitored_modes = parse_mode_list(scheme, sim_monitor);

      std::optional<AttackPlan> plan;
      if (!sim_plan_path.empty()) {
        plan = plan_from_json(load_json(sim_plan_path), scheme.composed);
      } else if (sim_adversary == "per-outcome") {
        plan = synthesize_per_outcome(scheme.composed);
      } else if (sim_adversary == "grouped") {
        std::string label;
        std::string spec = sim_restrict.empty() ? "protocol" : sim_restrict;
        plan = synthesize_grouped(scheme.composed, parse_restriction(scheme, spec, label),
                                  label);
      } else if (sim_adversary != "none") {
        throw ConfigError("unknown adversary '" + sim_adversary + "'");
      }

      SessionConfig config{.rounds = sim_rounds,
                           .seed = sim_seed,
                           .plan = plan ? &*plan : nullptr,
                           .collect_records = !sim_records.empty(),
                           .alice_weights = alice_weights};
      SessionReport report = run_session(scheme, config);
      write_output(simulate_args.out, report_to_text(report));
      if (!sim_csv_prefix.empty()) {
        std::ofstream raw(sim_csv_prefix + "-raw.csv", std::ios::binary);
        std::ofstream meanings(sim_csv_prefix + "-meanings.csv", std::ios::binary);
        if (!raw || !meanings) throw ConfigError("cannot write CSV files");
        write_histogram_csv(report, false, raw);
        write_histogram_csv(report, true, meanings);
      }
      if (!sim_records.empty()) {
        std::ofstream rec(sim_records, std::ios::binary);
        if (!rec) throw ConfigError("cannot write '" + sim_records + "'");
        write_records_csv(report, rec);
      }
    }

    if (cmd_tables->parsed()) {
      ProtocolScheme scheme = load_scheme(tables_args.scheme, tables_args.config);
      std::vector<Table> tables{reversal_table(scheme.composed),
                                outcome_table(scheme.composed)};
      if (!scheme.alice_states.empty()) {
        tables.push_back(statistics_table(scheme));
        tables.push_back(restricted_attack_table(scheme));
      }
      write_output(tables_args.out, render(tables, parse_table_format(tables_args.format)));
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const MathError& e) {
    std::cerr << "consistency error: " << e.what() << "\n";
    return 3;
  } catch (const PlanError& e) {
    std::cerr << "plan error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
