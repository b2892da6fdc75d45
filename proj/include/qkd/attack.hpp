#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qkd/optics.hpp"

namespace qkd {

enum class PlanMode { PerBasisState, Grouped };

struct PlanEntry {
  std::string key;     // detector label (per-outcome) or meaning (grouped)
  StateVector inject;  // normalized state in the apparatus input space
};

/// What Eve injects for each of Bob's outcomes. Per-outcome plans key on the
/// raw detector basis, grouped plans on Bob's interpreted meanings.
struct AttackPlan {
  std::string apparatus_id;
  PlanMode mode = PlanMode::PerBasisState;
  std::vector<PlanEntry> entries;
  std::optional<Subspace> restriction;
  std::string restriction_label;
  std::vector<std::string> unsolved;  // grouped keys with no solution

  const StateVector* find(const std::string& key) const;
};

/// Span of the reversed detector states inside the apparatus input space.
Subspace reversed_space(const ComposedApparatus& app);

/// Reversal attack: for each detector r, the injected state is the adjoint
/// image of r, verified to map back onto r up to a global phase.
AttackPlan synthesize_per_outcome(const ComposedApparatus& app);

/// Grouped attack: for each meaning m, finds a normalized input state (inside
/// the restriction, when given) whose image lies in the span of m's
/// detectors. Uses alternating projections between the image of the
/// restriction and the group span; ties are broken toward the uniform-phase
/// group combination. Unsolvable groups are reported, not fatal.
AttackPlan synthesize_grouped(const ComposedApparatus& app,
                              std::optional<Subspace> restriction = std::nullopt,
                              std::string restriction_label = {});

struct RestrictionCheck {
  std::string key;
  double residual_norm_sq;
  bool pass;
};

std::vector<RestrictionCheck> check_restriction(const AttackPlan& plan,
                                                const Subspace& allowed,
                                                double tol = kIsometryTol);

struct EntryDeterminism {
  std::string key;
  double off_target_probability;
  bool pass;
};

struct VerificationReport {
  std::vector<EntryDeterminism> determinism;
  bool deterministic = false;
  // Joint (source state, raw outcome) distribution, attacked vs honest.
  double raw_max_deviation = 0.0;
  bool raw_preserved = false;
  // Same after coarsening raw outcomes through the outcome map.
  double coarse_max_deviation = 0.0;
  bool coarse_preserved = false;
  std::vector<std::string> notes;

  bool ok() const { return deterministic && coarse_preserved; }
};

/// Checks that each entry forces its keyed outcome with probability 1 and
/// that the attack leaves Bob's statistics on the honest source unchanged,
/// at raw-outcome and at meaning granularity.
VerificationReport verify_plan(const AttackPlan& plan, const ComposedApparatus& app,
                               const std::vector<std::pair<StateVector, double>>& honest_source,
                               double tol = kIsometryTol);

/// Diagnostic: largest overlap between the measured subspaces of any two
/// distinct basis tags (0 when they are orthogonal, as in fixed-apparatus
/// schemes).
double basis_space_overlap(const ComposedApparatus& app);

nlohmann::json plan_to_json(const AttackPlan& plan);
AttackPlan plan_from_json(const nlohmann::json& j, const ComposedApparatus& app);

/// Enforces the plan invariants against an apparatus: key coverage,
/// normalization, and restriction residuals. Throws PlanError.
void validate_plan(const AttackPlan& plan, const ComposedApparatus& app);

}  // namespace qkd
