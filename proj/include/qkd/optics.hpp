#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qkd/hilbert.hpp"

namespace qkd {

struct PolarizationArm {
  bool operator==(const PolarizationArm&) const = default;
};
struct TimeBinArm {
  int n_min = 0;
  int n_max = 0;
  bool operator==(const TimeBinArm&) const = default;
};
using ArmKind = std::variant<PolarizationArm, TimeBinArm>;

/// All single-photon modes carried by an arm, in canonical order.
std::vector<ModeLabel> arm_modes(const std::string& arm, const ArmKind& kind);

/// Optical elements acting on the truncated (<= 1 photon) mode space.
///
/// Two-port splitters use the convention that the first output arm is the
/// transmitted continuation of the first input arm; transmission carries no
/// phase, reflection carries phase i.
struct Element {
  enum class Type { PIBS, BS, PBS, PR, PhaseShift, Delay, Mirror };

  Type type;
  std::vector<std::string> in_arms;
  std::vector<std::string> out_arms;
  double angle = 0.0;  // PR theta, PhaseShift phi
  int slots = 0;       // Delay shift

  static Element pibs(std::string in1, std::string in2, std::string out1, std::string out2);
  static Element bs(std::string in1, std::string in2, std::string out1, std::string out2);
  /// Transmits H with phase 1, reflects V with phase i. Output arms may
  /// repeat the input arm, in which case the element acts in place.
  static Element pbs(std::string in, std::string transmit, std::string reflect);
  /// Polarization rotator: D+ -> H, D- -> e^{i theta} V.
  static Element pr(std::string arm, double theta);
  static Element phase_shift(std::string arm, double phi);
  static Element delay(std::string arm, int slots);
  static Element mirror(std::string arm);
};

std::string to_string(Element::Type t);

/// Protocol basis tags: z/x for time-bin BB84, +/x(diagonal) for polarization.
enum class BasisTag : int { Z = 0, X = 1, Plus = 2, Cross = 3 };

struct Meaning {
  BasisTag basis;
  int bit;
  bool operator==(const Meaning&) const = default;
  std::strong_ordering operator<=>(const Meaning&) const = default;
};

/// Bob's interpretation of one detector: a meaning or inconclusive.
using Outcome = std::optional<Meaning>;
using OutcomeMap = std::vector<Outcome>;

std::string to_string(BasisTag t);
std::string to_string(const Meaning& m);
std::string to_string(const Outcome& o);
Meaning parse_meaning(std::string_view text);
Outcome parse_outcome(std::string_view text);

/// One measured detector: a single-photon output mode, with the forward
/// phase the apparatus imprints on it folded in (so the reversal tables come
/// out with the tabulated phases).
struct DetectorState {
  ModeLabel mode;
  Complex phase{1.0, 0.0};
};

struct InputArm {
  std::string arm;
  ArmKind kind;
  bool blocked = false;
  /// Modes the legitimate sender drives (the embedded protocol space).
  /// Defaults to all modes of the arm when empty and not blocked.
  std::vector<ModeLabel> driven_modes;
};

struct Apparatus {
  std::string name;
  std::vector<InputArm> inputs;
  std::vector<Element> elements;
  std::vector<DetectorState> detectors;
  OutcomeMap outcome_map;  // aligned with detectors
};

/// Result of composing an apparatus: the induced isometry on the minimal
/// input space containing the driven modes, the vacuum, and everything the
/// detector reversals reach, with the codomain trimmed to the populated
/// output modes.
struct ComposedApparatus {
  Apparatus apparatus;
  Isometry iso;
  std::vector<StateVector> detector_states;  // in iso.codomain(), phases folded
  std::vector<Meaning> meanings;             // distinct conclusive meanings, detector order
  std::vector<int> detector_meaning;         // detector -> index into meanings, -1 inconclusive

  const LabeledSpace& domain() const { return iso.domain(); }
  const LabeledSpace& codomain() const { return iso.codomain(); }
  int detector_count() const { return static_cast<int>(detector_states.size()); }
  std::string detector_label(int i) const;
};

/// Composes the apparatus and validates every invariant: element arms and
/// kinds, column orthonormality, vacuum -> vacuum, and that every detector
/// state lies in the image of the composed isometry.
ComposedApparatus compose(const Apparatus& app);

/// Fixed polarization-BB84 receiver: PIBS with blocked arm b, PR(theta) on
/// arm d, a PBS per output arm; detectors (+,0),(+,1),(x,0),(x,1).
Apparatus preset_polarization(double theta = 0.0);

/// Fixed Mach-Zehnder receiver for x/z time-bin BB84: BS, delayed upper path
/// (mirrors compensated by a pi shifter), BS; detectors at output slots 0..2
/// on both arms. The window must cover [-2, 3]; the boundary slots stay empty
/// but are part of the arm mode space.
Apparatus preset_mach_zehnder(int n_min = -2, int n_max = 3);

/// Apparatus by preset name (`polarization-bb84`, `mz-xz-bb84`).
Apparatus preset_by_name(const std::string& name);

// Declarative apparatus config (see README for the schema).
Apparatus apparatus_from_json(const nlohmann::json& j);

}  // namespace qkd
