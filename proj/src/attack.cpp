#include "qkd/attack.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qkd/io.hpp"

namespace qkd {

namespace {

constexpr double kSynthesisTol = 1e-10;
constexpr int kSynthesisMaxIters = 10000;

Eigen::VectorXcd project(const Eigen::MatrixXcd& basis, const Eigen::VectorXcd& x) {
  return basis * (basis.adjoint() * x);
}

}  // namespace

const StateVector* AttackPlan::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e.inject;
  return nullptr;
}

Subspace reversed_space(const ComposedApparatus& app) {
  std::vector<StateVector> rev;
  rev.reserve(app.detector_states.size());
  for (const auto& r : app.detector_states) rev.push_back(adjoint_apply(app.iso, r));
  Subspace out(app.domain(), rev);
  if (out.dim() != app.detector_count())
    throw MathError("reversed space dimension != detector count; detector basis "
                    "is not inside the apparatus image");
  return out;
}

AttackPlan synthesize_per_outcome(const ComposedApparatus& app) {
  AttackPlan plan;
  plan.apparatus_id = app.apparatus.name;
  plan.mode = PlanMode::PerBasisState;
  for (int i = 0; i < app.detector_count(); ++i) {
    StateVector inject = adjoint_apply(app.iso, app.detector_states[i]).canonical();
    // Round-trip check: Bob processes and measures exactly this detector state.
    if (!states_equal_up_to_global_phase(apply(app.iso, inject), app.detector_states[i],
                                         kSynthesisTol))
      throw MathError("reversal for detector " + app.detector_label(i) +
                      " does not reproduce the outcome");
    plan.entries.push_back({app.detector_label(i), std::move(inject)});
  }
  return plan;
}

AttackPlan synthesize_grouped(const ComposedApparatus& app,
                              std::optional<Subspace> restriction,
                              std::string restriction_label) {
  if (restriction && restriction->ambient() != app.domain())
    throw MathError("restriction subspace not inside the apparatus input space");

  AttackPlan plan;
  plan.apparatus_id = app.apparatus.name;
  plan.mode = PlanMode::Grouped;
  plan.restriction = restriction;
  plan.restriction_label = std::move(restriction_label);

  // Image of the allowed input subspace; the isometry keeps columns orthonormal.
  Eigen::MatrixXcd allowed =
      restriction ? Eigen::MatrixXcd(app.iso.matrix() * restriction->basis_matrix())
                  : app.iso.matrix();

  for (std::size_t mi = 0; mi < app.meanings.size(); ++mi) {
    std::vector<int> group;
    for (int d = 0; d < app.detector_count(); ++d)
      if (app.detector_meaning[d] == static_cast<int>(mi)) group.push_back(d);
    const std::string key = to_string(app.meanings[mi]);

    Eigen::MatrixXcd span(app.codomain().dim(), group.size());
    for (std::size_t g = 0; g < group.size(); ++g)
      span.col(g) = app.detector_states[group[g]].amps();

    // Tie-break target: the uniform-phase combination of the group.
    Eigen::VectorXcd uniform = span.rowwise().sum() / std::sqrt(double(group.size()));

    // Alternating projections between the allowed image and the group span
    // converge to the projection of the start vector onto their intersection.
    std::optional<Eigen::VectorXcd> solution;
    std::vector<Eigen::VectorXcd> starts{uniform};
    for (std::size_t g = 0; g < group.size(); ++g) starts.push_back(span.col(g));
    for (const auto& start : starts) {
      Eigen::VectorXcd x = start;
      for (int it = 0; it < kSynthesisMaxIters; ++it) {
        x = project(span, project(allowed, x));
        double n = x.norm();
        if (n < 1e-7) break;
        Eigen::VectorXcd y = x / n;
        if ((y - project(allowed, y)).norm() <= kSynthesisTol &&
            (y - project(span, y)).norm() <= kSynthesisTol) {
          solution = y;
          break;
        }
      }
      if (solution) break;
    }
    if (!solution) {
      plan.unsolved.push_back(key);
      continue;
    }
    StateVector image(app.codomain(), *solution);
    StateVector inject = adjoint_apply(app.iso, image).canonical();
    plan.entries.push_back({key, std::move(inject)});
  }
  return plan;
}

std::vector<RestrictionCheck> check_restriction(const AttackPlan& plan,
                                                const Subspace& allowed, double tol) {
  std::vector<RestrictionCheck> out;
  out.reserve(plan.entries.size());
  for (const auto& e : plan.entries) {
    double residual = project_onto(allowed, e.inject).residual_norm_sq;
    out.push_back({e.key, residual, residual <= tol});
  }
  return out;
}

namespace {

// Born probabilities of each detector for an input-space state; the trailing
// entry is the leftover (no-click) mass.
std::vector<double> detector_probabilities(const ComposedApparatus& app,
                                           const StateVector& input) {
  StateVector out = apply(app.iso, input);
  std::vector<double> p(app.detector_states.size() + 1, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < app.detector_states.size(); ++i) {
    p[i] = std::norm(inner(app.detector_states[i], out));
    total += p[i];
  }
  p.back() = std::max(0.0, out.amps().squaredNorm() - total);
  return p;
}

}  // namespace

VerificationReport verify_plan(const AttackPlan& plan, const ComposedApparatus& app,
                               const std::vector<std::pair<StateVector, double>>& honest_source,
                               double tol) {
  VerificationReport report;
  const int n_det = app.detector_count();

  // (i) Determinism: each entry forces its keyed outcome with probability 1.
  report.deterministic = true;
  for (const auto& e : plan.entries) {
    std::vector<double> p = detector_probabilities(app, e.inject);
    double on_target = 0.0;
    for (int d = 0; d < n_det; ++d) {
      bool target = plan.mode == PlanMode::PerBasisState
                        ? app.detector_label(d) == e.key
                        : app.detector_meaning[d] >= 0 &&
                              to_string(app.meanings[app.detector_meaning[d]]) == e.key;
      if (target) on_target += p[d];
    }
    double off = 1.0 - on_target;
    bool pass = off <= tol;
    report.determinism.push_back({e.key, off, pass});
    report.deterministic = report.deterministic && pass;
  }
  for (const auto& key : plan.unsolved) {
    report.determinism.push_back({key, 1.0, false});
    report.deterministic = false;
    report.notes.push_back("no injected state for '" + key + "' (unsolved group)");
  }

  // (ii) Statistics preservation over the honest source.
  double total_prob = 0.0;
  for (const auto& [state, prob] : honest_source) total_prob += prob;
  if (std::abs(total_prob - 1.0) > kNormTol)
    throw MathError("honest source probabilities must sum to 1");

  const StateVector vacuum =
      StateVector::unit(app.domain(), BasisState::vacuum());
  std::vector<std::vector<double>> inject_p;
  for (const auto& e : plan.entries) inject_p.push_back(detector_probabilities(app, e.inject));
  const std::vector<double> vacuum_p = detector_probabilities(app, vacuum);

  const int n_meanings = static_cast<int>(app.meanings.size());
  for (const auto& [state, prob] : honest_source) {
    std::vector<double> honest = detector_probabilities(app, state);
    std::vector<double> attacked(n_det + 1, 0.0);

    auto add_injection = [&](double weight, int entry_index) {
      const auto& q = entry_index >= 0 ? inject_p[entry_index] : vacuum_p;
      for (int d = 0; d <= n_det; ++d) attacked[d] += weight * q[d];
    };

    if (plan.mode == PlanMode::PerBasisState) {
      for (int d = 0; d < n_det; ++d) {
        int idx = -1;
        for (std::size_t k = 0; k < plan.entries.size(); ++k)
          if (plan.entries[k].key == app.detector_label(d)) idx = static_cast<int>(k);
        add_injection(honest[d], idx);
      }
      add_injection(honest[n_det], -1);  // Eve saw no click: she forwards vacuum
    } else {
      std::vector<double> group_mass(n_meanings, 0.0);
      double inconclusive = honest[n_det];
      for (int d = 0; d < n_det; ++d) {
        if (app.detector_meaning[d] >= 0)
          group_mass[app.detector_meaning[d]] += honest[d];
        else
          inconclusive += honest[d];
      }
      for (int m = 0; m < n_meanings; ++m) {
        int idx = -1;
        for (std::size_t k = 0; k < plan.entries.size(); ++k)
          if (plan.entries[k].key == to_string(app.meanings[m])) idx = static_cast<int>(k);
        add_injection(group_mass[m], idx);
      }
      add_injection(inconclusive, -1);  // inconclusive for Eve: she forwards vacuum
    }

    for (int d = 0; d <= n_det; ++d)
      report.raw_max_deviation =
          std::max(report.raw_max_deviation, std::abs(prob * (attacked[d] - honest[d])));

    std::vector<double> honest_coarse(n_meanings + 1, 0.0), attacked_coarse(n_meanings + 1, 0.0);
    for (int d = 0; d < n_det; ++d) {
      int m = app.detector_meaning[d] >= 0 ? app.detector_meaning[d] : n_meanings;
      honest_coarse[m] += honest[d];
      attacked_coarse[m] += attacked[d];
    }
    honest_coarse[n_meanings] += honest[n_det];
    attacked_coarse[n_meanings] += attacked[n_det];
    for (int m = 0; m <= n_meanings; ++m)
      report.coarse_max_deviation = std::max(
          report.coarse_max_deviation, std::abs(prob * (attacked_coarse[m] - honest_coarse[m])));
  }

  report.raw_preserved = report.raw_max_deviation <= 1e-12;
  report.coarse_preserved = report.coarse_max_deviation <= 1e-12;
  return report;
}

double basis_space_overlap(const ComposedApparatus& app) {
  double overlap = 0.0;
  for (int i = 0; i < app.detector_count(); ++i)
    for (int j = 0; j < app.detector_count(); ++j) {
      int mi = app.detector_meaning[i], mj = app.detector_meaning[j];
      if (mi < 0 || mj < 0 || app.meanings[mi].basis == app.meanings[mj].basis) continue;
      overlap = std::max(overlap,
                         std::abs(inner(app.detector_states[i], app.detector_states[j])));
    }
  return overlap;
}

nlohmann::json plan_to_json(const AttackPlan& plan) {
  nlohmann::json j;
  j["apparatus"] = plan.apparatus_id;
  j["mode"] = plan.mode == PlanMode::PerBasisState ? "per-outcome" : "grouped";
  if (plan.restriction) {
    nlohmann::json basis = nlohmann::json::array();
    for (const auto& v : plan.restriction->basis_states()) basis.push_back(state_to_json(v));
    j["restriction"] = {{"label", plan.restriction_label}, {"basis", basis}};
  } else {
    j["restriction"] = nullptr;
  }
  j["entries"] = nlohmann::json::array();
  for (const auto& e : plan.entries)
    j["entries"].push_back({{"key", e.key}, {"state", state_to_json(e.inject)}});
  j["unsolved"] = plan.unsolved;
  return j;
}

namespace {

StateVector plan_state_from_json(const nlohmann::json& j, const LabeledSpace& domain) {
  StateVector s = state_from_json(j);
  if (s.space() != domain)
    throw PlanError("plan state basis does not match the apparatus input space");
  return s;
}

}  // namespace

AttackPlan plan_from_json(const nlohmann::json& j, const ComposedApparatus& app) {
  AttackPlan plan;
  try {
    plan.apparatus_id = j.at("apparatus").get<std::string>();
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "per-outcome")
      plan.mode = PlanMode::PerBasisState;
    else if (mode == "grouped")
      plan.mode = PlanMode::Grouped;
    else
      throw PlanError("unknown plan mode '" + mode + "'");
    if (j.contains("restriction") && !j.at("restriction").is_null()) {
      const auto& r = j.at("restriction");
      plan.restriction_label = r.value("label", "");
      std::vector<StateVector> basis;
      for (const auto& b : r.at("basis"))
        basis.push_back(plan_state_from_json(b, app.domain()));
      plan.restriction = Subspace(app.domain(), basis);
    }
    for (const auto& e : j.at("entries"))
      plan.entries.push_back({e.at("key").get<std::string>(),
                              plan_state_from_json(e.at("state"), app.domain())});
    if (j.contains("unsolved"))
      plan.unsolved = j.at("unsolved").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw PlanError(std::string("plan parse error: ") + e.what());
  }
  validate_plan(plan, app);
  return plan;
}

void validate_plan(const AttackPlan& plan, const ComposedApparatus& app) {
  if (plan.apparatus_id != app.apparatus.name)
    throw PlanError("plan targets apparatus '" + plan.apparatus_id + "', not '" +
                    app.apparatus.name + "'");
  std::set<std::string> keys;
  for (const auto& e : plan.entries) {
    if (!keys.insert(e.key).second) throw PlanError("duplicate plan key '" + e.key + "'");
    if (e.inject.space() != app.domain())
      throw PlanError("plan state for '" + e.key + "' not in the apparatus input space");
    if (!e.inject.is_normalized())
      throw PlanError("plan state for '" + e.key + "' is not normalized");
    if (plan.restriction) {
      double residual = project_onto(*plan.restriction, e.inject).residual_norm_sq;
      if (residual > kIsometryTol)
        throw PlanError("plan state for '" + e.key + "' leaks outside its restriction");
    }
  }
  if (plan.mode == PlanMode::PerBasisState) {
    for (int d = 0; d < app.detector_count(); ++d)
      if (!keys.count(app.detector_label(d)))
        throw PlanError("per-outcome plan missing detector " + app.detector_label(d));
  } else {
    for (const auto& m : app.meanings) {
      std::string key = to_string(m);
      bool unsolved =
          std::find(plan.unsolved.begin(), plan.unsolved.end(), key) != plan.unsolved.end();
      if (!keys.count(key) && !unsolved)
        throw PlanError("grouped plan missing meaning " + key);
    }
  }
}

}  // namespace qkd
