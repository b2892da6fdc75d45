#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qkd/attack.hpp"
#include "qkd/optics.hpp"
#include "qkd/rng.hpp"

namespace qkd {

/// A prepare-and-measure scheme: Alice's encoders over the apparatus input
/// space, Bob's composed fixed apparatus, and an optional set of monitored
/// input modes (shutter / extra-detector policy).
struct ProtocolScheme {
  std::string name;
  ComposedApparatus composed;
  /// (meaning, embedded state); states normalized, orthogonal per basis tag.
  std::vector<std::pair<Meaning, StateVector>> alice_states;
  std::vector<ModeLabel> monitored_modes;
};

ProtocolScheme scheme_polarization_bb84(double theta = 0.0);
ProtocolScheme scheme_mz_xz_bb84();
ProtocolScheme scheme_by_name(const std::string& name);

/// Subspace of the input space spanned by the protocol's legitimate modes:
/// the driven slots, mirrored onto every input arm (e.g. times 0 and 1 on
/// both arms of the interferometer).
Subspace protocol_restriction(const ProtocolScheme& scheme);
std::vector<ModeLabel> protocol_restriction_modes(const ProtocolScheme& scheme);

StateVector alice_encode(const ProtocolScheme& scheme, BasisTag basis, int bit);

struct OutcomeDistribution {
  std::vector<double> p_detector;  // detector order
  double p_no_click = 0.0;
};

/// Exact Born-rule outcome probabilities. `incoming` may live in the
/// apparatus input space (it is processed first) or in the output space.
OutcomeDistribution analytic_distribution(const ProtocolScheme& scheme,
                                          const StateVector& incoming);

inline constexpr int kNoClick = -1;

/// Samples Bob's raw outcome by inverse CDF in detector order; leftover
/// probability mass yields kNoClick.
int bob_measure(const ProtocolScheme& scheme, const StateVector& incoming, RoundRng& rng);

/// True iff the incoming state carries more than kIsometryTol probability on
/// any monitored input mode.
bool monitor_inputs(const ProtocolScheme& scheme, const StateVector& incoming);

struct SessionConfig {
  std::uint64_t rounds = 0;
  std::uint64_t seed = 0;
  const AttackPlan* plan = nullptr;  // null: honest channel
  bool collect_records = false;
  /// Prior over alice_states; empty means uniform.
  std::vector<double> alice_weights;
};

struct RoundRecord {
  std::uint8_t alice;     // index into alice_states
  std::int8_t bob_raw;    // detector index or kNoClick
  std::int8_t eve_entry;  // plan entry index, -1 when absent/gap
  std::uint8_t flags;     // bit 0 sifted, bit 1 error, bit 2 alarm

  bool sifted() const { return flags & 1; }
  bool error() const { return flags & 2; }
  bool alarm() const { return flags & 4; }

  bool operator==(const RoundRecord&) const = default;
};

struct SessionReport {
  std::string scheme;
  std::string adversary;  // "none", "per-outcome", "grouped"
  std::uint64_t rounds = 0;
  std::uint64_t seed = 0;

  std::vector<std::string> alice_labels;    // meaning of each alice state
  std::vector<std::string> outcome_labels;  // detector labels + "no_click"
  std::vector<std::string> meaning_labels;  // meanings + "inconclusive"
  std::vector<int> detector_meaning;        // detector -> meaning index, -1 inconclusive

  // raw_hist[alice][outcome], meaning_hist[alice][meaning]; both sum to rounds.
  std::vector<std::vector<std::uint64_t>> raw_hist;
  std::vector<std::vector<std::uint64_t>> meaning_hist;

  std::uint64_t sifted = 0;
  std::uint64_t errors = 0;
  std::uint64_t eve_agree = 0;
  std::uint64_t monitor_alarms = 0;

  std::vector<RoundRecord> records;  // filled when requested

  double qber() const { return sifted ? double(errors) / double(sifted) : 0.0; }
  double eve_agreement() const { return sifted ? double(eve_agree) / double(sifted) : 0.0; }

  bool operator==(const SessionReport&) const = default;
};

/// Runs a session; parallelized over rounds with OpenMP when available.
/// Results are identical to the serial reference for any thread count.
SessionReport run_session(const ProtocolScheme& scheme, const SessionConfig& config);

/// Serial reference implementation, kept for testing and benchmarking.
SessionReport run_session_serial(const ProtocolScheme& scheme, const SessionConfig& config);

std::string report_to_text(const SessionReport& report);
/// CSV histogram, columns: alice_basis, alice_bit, outcome, count.
void write_histogram_csv(const SessionReport& report, bool meanings, std::ostream& out);
void write_records_csv(const SessionReport& report, std::ostream& out);

}  // namespace qkd
