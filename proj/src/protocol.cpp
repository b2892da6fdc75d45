#include "qkd/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qkd/io.hpp"

namespace qkd {

namespace {

ProtocolScheme make_scheme(std::string name, Apparatus app,
                           std::vector<std::pair<Meaning, StateVector>> alice) {
  ProtocolScheme scheme{std::move(name), compose(app), std::move(alice), {}};
  for (const auto& [m, s] : scheme.alice_states) {
    if (!s.is_normalized())
      throw MathError("alice state " + to_string(m) + " is not normalized");
    for (const auto& [m2, s2] : scheme.alice_states)
      if (m.basis == m2.basis && m.bit != m2.bit &&
          std::abs(inner(s, s2)) > kIsometryTol)
        throw MathError("alice states within basis " + to_string(m.basis) +
                        " are not orthogonal");
  }
  return scheme;
}

}  // namespace

ProtocolScheme scheme_polarization_bb84(double theta) {
  Apparatus app = preset_polarization(theta);
  ComposedApparatus composed = compose(app);
  const LabeledSpace& domain = composed.domain();
  auto photon = [&](const char* arm, Polarization p) {
    return StateVector::unit(domain, BasisState::photon(ModeLabel::pol(arm, p)));
  };
  const double s = 1.0 / std::numbers::sqrt2;
  StateVector h = photon("a", Polarization::H), v = photon("a", Polarization::V);
  std::vector<std::pair<Meaning, StateVector>> alice;
  alice.emplace_back(Meaning{BasisTag::Plus, 0}, h);
  alice.emplace_back(Meaning{BasisTag::Plus, 1}, v);
  alice.emplace_back(Meaning{BasisTag::Cross, 0}, (Complex(s) * h + Complex(s) * v));
  alice.emplace_back(Meaning{BasisTag::Cross, 1}, (Complex(s) * h - Complex(s) * v));
  return make_scheme("polarization-bb84", std::move(app), std::move(alice));
}

ProtocolScheme scheme_mz_xz_bb84() {
  Apparatus app = preset_mach_zehnder();
  ComposedApparatus composed = compose(app);
  const LabeledSpace& domain = composed.domain();
  auto slot = [&](int n) {
    return StateVector::unit(domain, BasisState::photon(ModeLabel::time_bin("a", n)));
  };
  const double s = 1.0 / std::numbers::sqrt2;
  std::vector<std::pair<Meaning, StateVector>> alice;
  alice.emplace_back(Meaning{BasisTag::Z, 0}, slot(0));
  alice.emplace_back(Meaning{BasisTag::Z, 1}, slot(1));
  alice.emplace_back(Meaning{BasisTag::X, 0}, Complex(s) * slot(0) + Complex(s) * slot(1));
  alice.emplace_back(Meaning{BasisTag::X, 1}, Complex(s) * slot(0) - Complex(s) * slot(1));
  return make_scheme("mz-xz-bb84", std::move(app), std::move(alice));
}

ProtocolScheme scheme_by_name(const std::string& name) {
  if (name == "polarization-bb84") return scheme_polarization_bb84();
  if (name == "mz-xz-bb84") return scheme_mz_xz_bb84();
  throw ConfigError("unknown scheme '" + name +
                    "' (expected polarization-bb84 or mz-xz-bb84)");
}

std::vector<ModeLabel> protocol_restriction_modes(const ProtocolScheme& scheme) {
  // Kind values the protocol legitimately uses (e.g. slots 0 and 1)...
  std::set<std::variant<Polarization, int>> values;
  for (const auto& in : scheme.composed.apparatus.inputs)
    for (const auto& m : in.driven_modes) values.insert(m.kind);
  // ...mirrored onto every input arm, restricted to the composed input space.
  std::vector<ModeLabel> modes;
  for (const auto& in : scheme.composed.apparatus.inputs)
    for (const auto& v : values) {
      ModeLabel m{in.arm, v};
      if (scheme.composed.domain().contains(BasisState::photon(m))) modes.push_back(m);
    }
  return modes;
}

Subspace protocol_restriction(const ProtocolScheme& scheme) {
  return Subspace::from_modes(scheme.composed.domain(), protocol_restriction_modes(scheme));
}

StateVector alice_encode(const ProtocolScheme& scheme, BasisTag basis, int bit) {
  for (const auto& [m, s] : scheme.alice_states)
    if (m.basis == basis && m.bit == bit) return s;
  throw ConfigError("scheme '" + scheme.name + "' does not encode (" + to_string(basis) +
                    "," + std::to_string(bit) + ")");
}

OutcomeDistribution analytic_distribution(const ProtocolScheme& scheme,
                                          const StateVector& incoming) {
  const ComposedApparatus& app = scheme.composed;
  StateVector out = incoming.space() == app.codomain() ? incoming : apply(app.iso, incoming);
  if (!out.is_normalized(1e-6)) throw MathError("bob_measure input is not normalized");
  OutcomeDistribution dist;
  double total = 0.0;
  for (const auto& r : app.detector_states) {
    double p = std::norm(inner(r, out));
    dist.p_detector.push_back(p);
    total += p;
  }
  dist.p_no_click = std::max(0.0, 1.0 - total);
  return dist;
}

namespace {

int sample_cdf(const std::vector<double>& cdf, double u) {
  for (std::size_t i = 0; i < cdf.size(); ++i)
    if (u < cdf[i]) return static_cast<int>(i);
  return kNoClick;
}

std::vector<double> to_cdf(const OutcomeDistribution& dist) {
  std::vector<double> cdf(dist.p_detector.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    acc += dist.p_detector[i];
    cdf[i] = acc;
  }
  return cdf;
}

bool state_alarms(const ProtocolScheme& scheme, const StateVector& s) {
  for (const auto& m : scheme.monitored_modes)
    if (std::norm(s.amp(BasisState::photon(m))) > kIsometryTol) return true;
  return false;
}

// Everything the per-round kernel needs, precomputed once per session.
struct SessionTables {
  int n_alice = 0;
  int n_det = 0;
  int n_meanings = 0;
  std::vector<double> alice_cdf;                // prior over alice states
  std::vector<std::vector<double>> honest_cdf;  // per alice state
  std::vector<int> alice_meaning;               // alice index -> meaning index
  std::vector<bool> alice_alarm;
  std::vector<int> detector_meaning;  // -1 inconclusive
  // Attack tables (empty when honest):
  std::vector<int> eve_entry_of_detector;  // detector -> plan entry, -1 gap
  std::vector<std::vector<double>> entry_cdf;
  std::vector<int> entry_meaning;  // eve's record per entry
  std::vector<bool> entry_alarm;
  std::vector<double> vacuum_cdf;
};

SessionTables build_tables(const ProtocolScheme& scheme, const SessionConfig& config) {
  const AttackPlan* plan = config.plan;
  const ComposedApparatus& app = scheme.composed;
  SessionTables t;
  t.n_alice = static_cast<int>(scheme.alice_states.size());
  t.n_det = app.detector_count();
  t.n_meanings = static_cast<int>(app.meanings.size());
  t.detector_meaning = app.detector_meaning;
  {
    std::vector<double> w = config.alice_weights;
    if (w.empty()) w.assign(static_cast<std::size_t>(t.n_alice), 1.0);
    if (w.size() != static_cast<std::size_t>(t.n_alice))
      throw ConfigError("alice_weights size does not match the number of alice states");
    double total = 0.0;
    for (double x : w) {
      if (x < 0) throw ConfigError("alice_weights must be non-negative");
      total += x;
    }
    if (total <= 0) throw ConfigError("alice_weights must not all be zero");
    double acc = 0.0;
    for (double x : w) {
      acc += x / total;
      t.alice_cdf.push_back(acc);
    }
    t.alice_cdf.back() = 2.0;  // guard against rounding in the final bin
  }
  for (const auto& [m, s] : scheme.alice_states) {
    t.honest_cdf.push_back(to_cdf(analytic_distribution(scheme, s)));
    auto it = std::find(app.meanings.begin(), app.meanings.end(), m);
    t.alice_meaning.push_back(it == app.meanings.end()
                                  ? -1
                                  : static_cast<int>(it - app.meanings.begin()));
    t.alice_alarm.push_back(state_alarms(scheme, s));
  }
  if (plan) {
    for (std::size_t k = 0; k < plan->entries.size(); ++k) {
      const auto& e = plan->entries[k];
      t.entry_cdf.push_back(to_cdf(analytic_distribution(scheme, e.inject)));
      t.entry_alarm.push_back(state_alarms(scheme, e.inject));
      int meaning = -1;
      if (plan->mode == PlanMode::Grouped) {
        for (int m = 0; m < t.n_meanings; ++m)
          if (to_string(app.meanings[m]) == e.key) meaning = m;
      } else {
        for (int d = 0; d < t.n_det; ++d)
          if (app.detector_label(d) == e.key) meaning = t.detector_meaning[d];
      }
      t.entry_meaning.push_back(meaning);
    }
    t.eve_entry_of_detector.assign(t.n_det, -1);
    for (int d = 0; d < t.n_det; ++d) {
      std::string key = plan->mode == PlanMode::PerBasisState
                            ? app.detector_label(d)
                            : (t.detector_meaning[d] >= 0
                                   ? to_string(app.meanings[t.detector_meaning[d]])
                                   : std::string());
      for (std::size_t k = 0; k < plan->entries.size(); ++k)
        if (plan->entries[k].key == key) t.eve_entry_of_detector[d] = static_cast<int>(k);
    }
    StateVector vacuum = StateVector::unit(app.domain(), BasisState::vacuum());
    t.vacuum_cdf = to_cdf(analytic_distribution(scheme, vacuum));
  }
  return t;
}

struct Accumulator {
  std::vector<std::vector<std::uint64_t>> raw_hist;
  std::vector<std::vector<std::uint64_t>> meaning_hist;
  std::uint64_t sifted = 0, errors = 0, eve_agree = 0, alarms = 0;

  explicit Accumulator(const SessionTables& t)
      : raw_hist(t.n_alice, std::vector<std::uint64_t>(t.n_det + 1, 0)),
        meaning_hist(t.n_alice, std::vector<std::uint64_t>(t.n_meanings + 1, 0)) {}

  void merge(const Accumulator& o) {
    for (std::size_t a = 0; a < raw_hist.size(); ++a) {
      for (std::size_t i = 0; i < raw_hist[a].size(); ++i) raw_hist[a][i] += o.raw_hist[a][i];
      for (std::size_t i = 0; i < meaning_hist[a].size(); ++i)
        meaning_hist[a][i] += o.meaning_hist[a][i];
    }
    sifted += o.sifted;
    errors += o.errors;
    eve_agree += o.eve_agree;
    alarms += o.alarms;
  }
};

RoundRecord simulate_round(const SessionTables& t, const ProtocolScheme& scheme,
                           bool attacked, std::uint64_t seed, std::uint64_t round) {
  RoundRng rng(seed, round);
  const int a = sample_cdf(t.alice_cdf, rng.next_unit());
  int bob_raw;
  int eve_entry = -1;
  bool alarm;
  if (!attacked) {
    bob_raw = sample_cdf(t.honest_cdf[a], rng.next_unit());
    alarm = t.alice_alarm[a];
  } else {
    // Eve measures the honest state the way Bob would, then injects the
    // planned state for what she saw.
    int eve_raw = sample_cdf(t.honest_cdf[a], rng.next_unit());
    eve_entry = eve_raw == kNoClick ? -1 : t.eve_entry_of_detector[eve_raw];
    const auto& cdf = eve_entry >= 0 ? t.entry_cdf[eve_entry] : t.vacuum_cdf;
    bob_raw = sample_cdf(cdf, rng.next_unit());
    alarm = eve_entry >= 0 && t.entry_alarm[eve_entry];
  }
  const int bob_meaning = bob_raw == kNoClick ? -1 : t.detector_meaning[bob_raw];
  const Meaning alice = scheme.alice_states[a].first;
  bool sifted = bob_meaning >= 0 &&
                scheme.composed.meanings[bob_meaning].basis == alice.basis;
  bool error = sifted && scheme.composed.meanings[bob_meaning].bit != alice.bit;
  std::uint8_t flags = 0;
  if (sifted) flags |= 1;
  if (error) flags |= 2;
  if (alarm) flags |= 4;
  return RoundRecord{static_cast<std::uint8_t>(a), static_cast<std::int8_t>(bob_raw),
                     static_cast<std::int8_t>(eve_entry), flags};
}

void accumulate(const SessionTables& t, const RoundRecord& rec, Accumulator& acc) {
  const int raw_slot = rec.bob_raw == kNoClick ? t.n_det : rec.bob_raw;
  const int bob_meaning = rec.bob_raw == kNoClick ? -1 : t.detector_meaning[rec.bob_raw];
  const int meaning_slot = bob_meaning < 0 ? t.n_meanings : bob_meaning;
  acc.raw_hist[rec.alice][raw_slot]++;
  acc.meaning_hist[rec.alice][meaning_slot]++;
  if (rec.sifted()) {
    acc.sifted++;
    if (rec.error()) acc.errors++;
    if (rec.eve_entry >= 0 && t.entry_meaning[rec.eve_entry] == bob_meaning)
      acc.eve_agree++;
  }
  if (rec.alarm()) acc.alarms++;
}

SessionReport finish_report(const ProtocolScheme& scheme, const SessionConfig& config,
                            const SessionTables& t, const Accumulator& acc,
                            std::vector<RoundRecord> records) {
  SessionReport report;
  report.scheme = scheme.name;
  report.adversary = !config.plan ? "none"
                     : config.plan->mode == PlanMode::PerBasisState ? "per-outcome"
                                                                    : "grouped";
  report.rounds = config.rounds;
  report.seed = config.seed;
  for (const auto& [m, s] : scheme.alice_states) report.alice_labels.push_back(to_string(m));
  for (int d = 0; d < t.n_det; ++d)
    report.outcome_labels.push_back(scheme.composed.detector_label(d));
  report.outcome_labels.push_back("no_click");
  for (const auto& m : scheme.composed.meanings) report.meaning_labels.push_back(to_string(m));
  report.meaning_labels.push_back("inconclusive");
  report.detector_meaning = t.detector_meaning;
  report.raw_hist = acc.raw_hist;
  report.meaning_hist = acc.meaning_hist;
  report.sifted = acc.sifted;
  report.errors = acc.errors;
  report.eve_agree = acc.eve_agree;
  report.monitor_alarms = acc.alarms;
  report.records = std::move(records);
  return report;
}

void check_session_preconditions(const ProtocolScheme& scheme, const SessionConfig& config) {
  if (config.rounds == 0) throw ConfigError("session needs at least one round");
  if (config.plan) {
    validate_plan(*config.plan, scheme.composed);
    std::vector<double> w = config.alice_weights;
    if (w.empty()) w.assign(scheme.alice_states.size(), 1.0);
    double total = 0.0;
    for (double x : w) total += x;
    std::vector<std::pair<StateVector, double>> source;
    for (std::size_t i = 0; i < scheme.alice_states.size(); ++i)
      source.emplace_back(scheme.alice_states[i].second, w.at(i) / total);
    VerificationReport v = verify_plan(*config.plan, scheme.composed, source);
    if (!v.ok())
      throw PlanError("attack plan failed verification against scheme '" + scheme.name +
                      "' (deterministic=" + (v.deterministic ? "yes" : "no") +
                      ", statistics preserved=" + (v.coarse_preserved ? "yes" : "no") + ")");
  }
}

}  // namespace

SessionReport run_session_serial(const ProtocolScheme& scheme, const SessionConfig& config) {
  check_session_preconditions(scheme, config);
  SessionTables t = build_tables(scheme, config);
  Accumulator acc(t);
  std::vector<RoundRecord> records;
  if (config.collect_records) records.resize(config.rounds);
  for (std::uint64_t i = 0; i < config.rounds; ++i) {
    RoundRecord rec = simulate_round(t, scheme, config.plan != nullptr, config.seed, i);
    accumulate(t, rec, acc);
    if (config.collect_records) records[i] = rec;
  }
  return finish_report(scheme, config, t, acc, std::move(records));
}

SessionReport run_session(const ProtocolScheme& scheme, const SessionConfig& config) {
#ifdef _OPENMP
  check_session_preconditions(scheme, config);
  SessionTables t = build_tables(scheme, config);
  std::vector<RoundRecord> records;
  if (config.collect_records) records.resize(config.rounds);

  Accumulator total(t);
  const std::int64_t rounds = static_cast<std::int64_t>(config.rounds);
#pragma omp parallel
  {
    Accumulator local(t);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < rounds; ++i) {
      RoundRecord rec = simulate_round(t, scheme, config.plan != nullptr, config.seed,
                                       static_cast<std::uint64_t>(i));
      accumulate(t, rec, local);
      if (config.collect_records) records[static_cast<std::size_t>(i)] = rec;
    }
#pragma omp critical
    total.merge(local);
  }
  return finish_report(scheme, config, t, total, std::move(records));
#else
  return run_session_serial(scheme, config);
#endif
}

int bob_measure(const ProtocolScheme& scheme, const StateVector& incoming, RoundRng& rng) {
  return sample_cdf(to_cdf(analytic_distribution(scheme, incoming)), rng.next_unit());
}

bool monitor_inputs(const ProtocolScheme& scheme, const StateVector& incoming) {
  if (scheme.monitored_modes.empty())
    throw ConfigError("no monitored input modes configured");
  return state_alarms(scheme, incoming);
}

std::string report_to_text(const SessionReport& r) {
  std::string out;
  out += "scheme: " + r.scheme + "\n";
  out += "adversary: " + r.adversary + "\n";
  out += "rounds: " + std::to_string(r.rounds) + "\n";
  out += "seed: " + std::to_string(r.seed) + "\n";
  out += "sifted: " + std::to_string(r.sifted) + "\n";
  out += "qber: " + (r.sifted ? fmt12(r.qber()) : std::string("n/a")) + "\n";
  if (r.adversary != "none")
    out += "eve_agreement: " + (r.sifted ? fmt12(r.eve_agreement()) : std::string("n/a")) + "\n";
  out += "monitor_alarms: " + std::to_string(r.monitor_alarms) + "\n";
  out += "meaning_histogram (alice,outcome,count):\n";
  for (std::size_t a = 0; a < r.meaning_hist.size(); ++a)
    for (std::size_t m = 0; m < r.meaning_hist[a].size(); ++m)
      if (r.meaning_hist[a][m])
        out += "  " + r.alice_labels[a] + "," + r.meaning_labels[m] + "," +
               std::to_string(r.meaning_hist[a][m]) + "\n";
  out += "raw_histogram (alice,outcome,count):\n";
  for (std::size_t a = 0; a < r.raw_hist.size(); ++a)
    for (std::size_t o = 0; o < r.raw_hist[a].size(); ++o)
      if (r.raw_hist[a][o])
        out += "  " + r.alice_labels[a] + "," + r.outcome_labels[o] + "," +
               std::to_string(r.raw_hist[a][o]) + "\n";
  return out;
}

namespace {

// alice label "z0" -> ("z", "0"); the bit is the final character.
std::pair<std::string, std::string> split_label(const std::string& label) {
  return {label.substr(0, label.size() - 1), label.substr(label.size() - 1)};
}

}  // namespace

void write_histogram_csv(const SessionReport& r, bool meanings, std::ostream& out) {
  out << "alice_basis,alice_bit,outcome,count\n";
  const auto& hist = meanings ? r.meaning_hist : r.raw_hist;
  const auto& labels = meanings ? r.meaning_labels : r.outcome_labels;
  for (std::size_t a = 0; a < hist.size(); ++a) {
    auto [basis, bit] = split_label(r.alice_labels[a]);
    for (std::size_t o = 0; o < hist[a].size(); ++o)
      out << basis << ',' << bit << ',' << labels[o] << ',' << hist[a][o] << '\n';
  }
}

void write_records_csv(const SessionReport& r, std::ostream& out) {
  out << "round,alice_basis,alice_bit,bob_raw,bob_meaning,eve_entry,sifted,error,alarm\n";
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    auto [basis, bit] = split_label(r.alice_labels[rec.alice]);
    const std::string raw =
        rec.bob_raw == kNoClick ? "no_click" : r.outcome_labels[rec.bob_raw];
    int m = rec.bob_raw == kNoClick ? -1 : r.detector_meaning[rec.bob_raw];
    const std::string& meaning = m >= 0 ? r.meaning_labels[m] : r.meaning_labels.back();
    out << i << ',' << basis << ',' << bit << ',' << raw << ',' << meaning << ','
        << int(rec.eve_entry) << ',' << rec.sifted() << ',' << rec.error() << ','
        << rec.alarm() << '\n';
  }
}

}  // namespace qkd
