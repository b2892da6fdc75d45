#include "qkd/optics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace qkd {

namespace {

constexpr Complex kI{0.0, 1.0};
const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

}  // namespace

std::vector<ModeLabel> arm_modes(const std::string& arm, const ArmKind& kind) {
  std::vector<ModeLabel> out;
  if (std::holds_alternative<PolarizationArm>(kind)) {
    out.push_back(ModeLabel::pol(arm, Polarization::H));
    out.push_back(ModeLabel::pol(arm, Polarization::V));
  } else {
    const auto& tb = std::get<TimeBinArm>(kind);
    for (int n = tb.n_min; n <= tb.n_max; ++n) out.push_back(ModeLabel::time_bin(arm, n));
  }
  return out;
}

Element Element::pibs(std::string in1, std::string in2, std::string out1, std::string out2) {
  return {Type::PIBS, {std::move(in1), std::move(in2)}, {std::move(out1), std::move(out2)}};
}
Element Element::bs(std::string in1, std::string in2, std::string out1, std::string out2) {
  return {Type::BS, {std::move(in1), std::move(in2)}, {std::move(out1), std::move(out2)}};
}
Element Element::pbs(std::string in, std::string transmit, std::string reflect) {
  return {Type::PBS, {std::move(in)}, {std::move(transmit), std::move(reflect)}};
}
Element Element::pr(std::string arm, double theta) {
  Element e{Type::PR, {arm}, {std::move(arm)}};
  e.angle = theta;
  return e;
}
Element Element::phase_shift(std::string arm, double phi) {
  Element e{Type::PhaseShift, {arm}, {std::move(arm)}};
  e.angle = phi;
  return e;
}
Element Element::delay(std::string arm, int slots) {
  Element e{Type::Delay, {arm}, {std::move(arm)}};
  e.slots = slots;
  return e;
}
Element Element::mirror(std::string arm) {
  return {Type::Mirror, {arm}, {std::move(arm)}};
}

std::string to_string(Element::Type t) {
  switch (t) {
    case Element::Type::PIBS: return "pibs";
    case Element::Type::BS: return "bs";
    case Element::Type::PBS: return "pbs";
    case Element::Type::PR: return "pr";
    case Element::Type::PhaseShift: return "phase";
    case Element::Type::Delay: return "delay";
    case Element::Type::Mirror: return "mirror";
  }
  return "?";
}

std::string to_string(BasisTag t) {
  switch (t) {
    case BasisTag::Z: return "z";
    case BasisTag::X: return "x";
    case BasisTag::Plus: return "+";
    case BasisTag::Cross: return "×";
  }
  return "?";
}

std::string to_string(const Meaning& m) { return to_string(m.basis) + std::to_string(m.bit); }

std::string to_string(const Outcome& o) { return o ? to_string(*o) : "inconclusive"; }

Meaning parse_meaning(std::string_view text) {
  for (BasisTag t : {BasisTag::Z, BasisTag::X, BasisTag::Plus, BasisTag::Cross}) {
    std::string tag = to_string(t);
    if (text.size() == tag.size() + 1 && text.substr(0, tag.size()) == tag) {
      char b = text.back();
      if (b == '0' || b == '1') return {t, b - '0'};
    }
  }
  throw ConfigError("bad meaning '" + std::string(text) + "' (expected e.g. z0, x1, +0)");
}

Outcome parse_outcome(std::string_view text) {
  if (text == "inconclusive") return std::nullopt;
  return parse_meaning(text);
}

namespace {

// Live arms while walking the element list.
struct CircuitState {
  std::map<std::string, ArmKind> arms;

  LabeledSpace space() const {
    std::vector<BasisState> basis{BasisState::vacuum()};
    for (const auto& [arm, kind] : arms)
      for (const auto& m : arm_modes(arm, kind)) basis.push_back(BasisState::photon(m));
    return LabeledSpace(std::move(basis));
  }

  const ArmKind& kind_of(const std::string& arm, const Element& e) const {
    auto it = arms.find(arm);
    if (it == arms.end())
      throw ConfigError("element " + to_string(e.type) + " reads unknown arm '" + arm + "'");
    return it->second;
  }
};

void copy_untouched(const CircuitState& from, const LabeledSpace& from_space,
                    const LabeledSpace& to_space,
                    const std::set<std::string>& touched, Eigen::MatrixXcd& mat) {
  mat(*to_space.index_of(BasisState::vacuum()), *from_space.index_of(BasisState::vacuum())) = 1.0;
  for (const auto& [arm, kind] : from.arms) {
    if (touched.count(arm)) continue;
    for (const auto& m : arm_modes(arm, kind)) {
      auto b = BasisState::photon(m);
      mat(*to_space.index_of(b), *from_space.index_of(b)) = 1.0;
    }
  }
}

// Applies one element: returns the next circuit state and the matrix of the
// element action from the current space to the next one.
std::pair<CircuitState, Eigen::MatrixXcd> element_action(const CircuitState& cur,
                                                         const Element& e) {
  CircuitState next = cur;
  std::set<std::string> touched(e.in_arms.begin(), e.in_arms.end());

  switch (e.type) {
    case Element::Type::PR:
    case Element::Type::PhaseShift:
    case Element::Type::Mirror:
    case Element::Type::Delay: {
      const std::string& arm = e.in_arms[0];
      ArmKind kind = cur.kind_of(arm, e);
      if (e.type == Element::Type::PR && !std::holds_alternative<PolarizationArm>(kind))
        throw ConfigError("pr element requires a polarization arm ('" + arm + "')");
      if (e.type == Element::Type::Delay) {
        if (!std::holds_alternative<TimeBinArm>(kind))
          throw ConfigError("delay element requires a time-bin arm ('" + arm + "')");
        if (e.slots <= 0) throw ConfigError("delay must shift by a positive slot count");
        auto tb = std::get<TimeBinArm>(kind);
        next.arms[arm] = TimeBinArm{tb.n_min + e.slots, tb.n_max + e.slots};
      }
      LabeledSpace from = cur.space(), to = next.space();
      Eigen::MatrixXcd mat = Eigen::MatrixXcd::Zero(to.dim(), from.dim());
      copy_untouched(cur, from, to, touched, mat);
      if (e.type == Element::Type::PR) {
        auto h = BasisState::photon(ModeLabel::pol(arm, Polarization::H));
        auto v = BasisState::photon(ModeLabel::pol(arm, Polarization::V));
        Complex eit = std::exp(kI * e.angle);
        // Columns follow PR|H> = (|H> + e^{i theta}|V>)/sqrt2,
        // PR|V> = (|H> - e^{i theta}|V>)/sqrt2, i.e. D+ -> H, D- -> e^{i theta} V.
        mat(*to.index_of(h), *from.index_of(h)) = kInvSqrt2;
        mat(*to.index_of(v), *from.index_of(h)) = eit * kInvSqrt2;
        mat(*to.index_of(h), *from.index_of(v)) = kInvSqrt2;
        mat(*to.index_of(v), *from.index_of(v)) = -eit * kInvSqrt2;
      } else {
        Complex factor = 1.0;
        if (e.type == Element::Type::PhaseShift) factor = std::exp(kI * e.angle);
        if (e.type == Element::Type::Mirror) factor = kI;
        int shift = e.type == Element::Type::Delay ? e.slots : 0;
        for (const auto& m : arm_modes(arm, kind)) {
          ModeLabel out = m;
          if (shift) out = ModeLabel::time_bin(arm, std::get<int>(m.kind) + shift);
          mat(*to.index_of(BasisState::photon(out)), *from.index_of(BasisState::photon(m))) =
              factor;
        }
      }
      return {std::move(next), std::move(mat)};
    }

    case Element::Type::PIBS:
    case Element::Type::BS: {
      const std::string &in1 = e.in_arms[0], &in2 = e.in_arms[1];
      const std::string &out1 = e.out_arms[0], &out2 = e.out_arms[1];
      if (in1 == in2) throw ConfigError("beamsplitter input arms must differ");
      if (out1 == out2) throw ConfigError("beamsplitter output arms must differ");
      ArmKind k1 = cur.kind_of(in1, e), k2 = cur.kind_of(in2, e);
      bool pol = std::holds_alternative<PolarizationArm>(k1);
      if (pol != std::holds_alternative<PolarizationArm>(k2))
        throw ConfigError("beamsplitter input arms must carry the same mode kind");
      if ((e.type == Element::Type::PIBS) != pol)
        throw ConfigError(pol ? "bs element requires time-bin arms (use pibs)"
                              : "pibs element requires polarization arms (use bs)");
      ArmKind out_kind;
      if (pol) {
        out_kind = PolarizationArm{};
      } else {
        auto t1 = std::get<TimeBinArm>(k1), t2 = std::get<TimeBinArm>(k2);
        out_kind = TimeBinArm{std::min(t1.n_min, t2.n_min), std::max(t1.n_max, t2.n_max)};
      }
      next.arms.erase(in1);
      next.arms.erase(in2);
      for (const auto& out : e.out_arms) {
        if (next.arms.count(out))
          throw ConfigError("beamsplitter output arm '" + out + "' already in use");
        next.arms[out] = out_kind;
      }
      LabeledSpace from = cur.space(), to = next.space();
      Eigen::MatrixXcd mat = Eigen::MatrixXcd::Zero(to.dim(), from.dim());
      copy_untouched(cur, from, to, touched, mat);
      // Per mode value: transmit keeps the phase, reflect gains i.
      for (const auto& out_mode : arm_modes(out1, out_kind)) {
        ModeLabel m1{in1, out_mode.kind}, m2{in2, out_mode.kind};
        ModeLabel o1 = out_mode, o2{out2, out_mode.kind};
        if (auto src = from.index_of(BasisState::photon(m1))) {
          mat(*to.index_of(BasisState::photon(o1)), *src) = kInvSqrt2;
          mat(*to.index_of(BasisState::photon(o2)), *src) = kI * kInvSqrt2;
        }
        if (auto src = from.index_of(BasisState::photon(m2))) {
          mat(*to.index_of(BasisState::photon(o1)), *src) = kI * kInvSqrt2;
          mat(*to.index_of(BasisState::photon(o2)), *src) = kInvSqrt2;
        }
      }
      return {std::move(next), std::move(mat)};
    }

    case Element::Type::PBS: {
      const std::string& in = e.in_arms[0];
      const std::string &tr = e.out_arms[0], &rf = e.out_arms[1];
      ArmKind kind = cur.kind_of(in, e);
      if (!std::holds_alternative<PolarizationArm>(kind))
        throw ConfigError("pbs element requires a polarization arm ('" + in + "')");
      next.arms.erase(in);
      std::set<std::string> outs{tr, rf};
      for (const auto& out : outs) {
        if (next.arms.count(out))
          throw ConfigError("pbs output arm '" + out + "' already in use");
        next.arms[out] = PolarizationArm{};
      }
      LabeledSpace from = cur.space(), to = next.space();
      Eigen::MatrixXcd mat = Eigen::MatrixXcd::Zero(to.dim(), from.dim());
      copy_untouched(cur, from, to, touched, mat);
      auto h_in = BasisState::photon(ModeLabel::pol(in, Polarization::H));
      auto v_in = BasisState::photon(ModeLabel::pol(in, Polarization::V));
      mat(*to.index_of(BasisState::photon(ModeLabel::pol(tr, Polarization::H))),
          *from.index_of(h_in)) = 1.0;
      mat(*to.index_of(BasisState::photon(ModeLabel::pol(rf, Polarization::V))),
          *from.index_of(v_in)) = kI;
      return {std::move(next), std::move(mat)};
    }
  }
  throw ConfigError("unknown element type");
}

}  // namespace

std::string ComposedApparatus::detector_label(int i) const {
  return to_string(apparatus.detectors.at(static_cast<std::size_t>(i)).mode);
}

ComposedApparatus compose(const Apparatus& app) {
  if (app.inputs.empty()) throw ConfigError("apparatus has no input arms");
  if (app.detectors.empty()) throw ConfigError("apparatus has no detectors");
  if (app.outcome_map.size() != app.detectors.size())
    throw ConfigError("outcome map size does not match detector count");

  CircuitState state;
  std::vector<ModeLabel> driven;
  for (const auto& in : app.inputs) {
    if (state.arms.count(in.arm)) throw ConfigError("duplicate input arm '" + in.arm + "'");
    if (const auto* tb = std::get_if<TimeBinArm>(&in.kind); tb && tb->n_min > tb->n_max)
      throw ConfigError("empty time-bin window on arm '" + in.arm + "'");
    state.arms[in.arm] = in.kind;
    auto all = arm_modes(in.arm, in.kind);
    if (in.blocked) {
      if (!in.driven_modes.empty())
        throw ConfigError("blocked arm '" + in.arm + "' cannot declare driven modes");
      continue;
    }
    const auto& modes = in.driven_modes.empty() ? all : in.driven_modes;
    for (const auto& m : modes) {
      if (m.arm != in.arm || std::find(all.begin(), all.end(), m) == all.end())
        throw ConfigError("driven mode " + to_string(m) + " not carried by arm '" +
                          in.arm + "'");
      driven.push_back(m);
    }
  }

  LabeledSpace initial = state.space();
  Eigen::MatrixXcd full = Eigen::MatrixXcd::Identity(initial.dim(), initial.dim());
  for (const auto& e : app.elements) {
    auto [next, mat] = element_action(state, e);
    full = mat * full;
    state = std::move(next);
  }
  LabeledSpace final_space = state.space();

  // Detector states in the full output space.
  std::vector<Eigen::VectorXcd> det_full;
  std::set<ModeLabel> det_modes;
  for (const auto& d : app.detectors) {
    if (!det_modes.insert(d.mode).second)
      throw ConfigError("duplicate detector mode " + to_string(d.mode));
    auto idx = final_space.index_of(BasisState::photon(d.mode));
    if (!idx)
      throw ConfigError("detector mode " + to_string(d.mode) +
                        " is not an output mode of the apparatus");
    if (std::abs(std::abs(d.phase) - 1.0) > kNormTol)
      throw ConfigError("detector phase must have unit magnitude");
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(final_space.dim());
    v[*idx] = d.phase;
    det_full.push_back(std::move(v));
  }

  // Minimal input space: vacuum, the driven modes, and the support of every
  // reversed detector state.
  std::set<int> domain_idx{*initial.index_of(BasisState::vacuum())};
  for (const auto& m : driven) domain_idx.insert(*initial.index_of(BasisState::photon(m)));
  for (const auto& r : det_full) {
    Eigen::VectorXcd rev = full.adjoint() * r;
    for (int i = 0; i < initial.dim(); ++i)
      if (std::abs(rev[i]) > kSupportTol) domain_idx.insert(i);
  }
  std::vector<BasisState> domain_basis;
  for (int i : domain_idx) domain_basis.push_back(initial.at(i));
  LabeledSpace domain(domain_basis);

  // Codomain: vacuum, every output mode populated from the domain, and the
  // detector modes themselves.
  std::set<int> codomain_idx{*final_space.index_of(BasisState::vacuum())};
  for (int i : domain_idx)
    for (int r = 0; r < final_space.dim(); ++r)
      if (std::abs(full(r, i)) > kSupportTol) codomain_idx.insert(r);
  for (const auto& d : app.detectors)
    codomain_idx.insert(*final_space.index_of(BasisState::photon(d.mode)));
  std::vector<BasisState> codomain_basis;
  for (int r : codomain_idx) codomain_basis.push_back(final_space.at(r));
  LabeledSpace codomain(codomain_basis);

  Eigen::MatrixXcd m(codomain.dim(), domain.dim());
  {
    int c = 0;
    for (int i : domain_idx) {
      int r = 0;
      for (int j : codomain_idx) m(r++, c) = full(j, i);
      ++c;
    }
  }
  Isometry iso(domain, codomain, std::move(m));  // validates M^dagger M = I

  // Vacuum maps to vacuum.
  {
    auto dv = *domain.index_of(BasisState::vacuum());
    auto cv = *codomain.index_of(BasisState::vacuum());
    if (std::abs(iso.matrix()(cv, dv) - 1.0) > kIsometryTol)
      throw MathError("apparatus does not map vacuum to vacuum");
  }

  ComposedApparatus out{app, std::move(iso), {}, {}, {}};
  for (std::size_t k = 0; k < app.detectors.size(); ++k) {
    StateVector r = app.detectors[k].phase *
                    StateVector::unit(codomain, BasisState::photon(app.detectors[k].mode));
    // Image check: H_B must lie inside iso(H~).
    StateVector round_trip = apply(out.iso, adjoint_apply(out.iso, r));
    if ((round_trip - r).norm() > kIsometryTol)
      throw MathError("detector " + to_string(app.detectors[k].mode) +
                      " is not inside the image of the composed apparatus");
    out.detector_states.push_back(std::move(r));
  }

  for (const auto& o : app.outcome_map) {
    if (!o) {
      out.detector_meaning.push_back(-1);
      continue;
    }
    auto it = std::find(out.meanings.begin(), out.meanings.end(), *o);
    if (it == out.meanings.end()) {
      out.meanings.push_back(*o);
      out.detector_meaning.push_back(static_cast<int>(out.meanings.size()) - 1);
    } else {
      out.detector_meaning.push_back(static_cast<int>(it - out.meanings.begin()));
    }
  }
  return out;
}

Apparatus preset_polarization(double theta) {
  Apparatus app;
  app.name = "polarization-bb84";
  app.inputs = {
      {"a", PolarizationArm{}, false,
       {ModeLabel::pol("a", Polarization::H), ModeLabel::pol("a", Polarization::V)}},
      {"b", PolarizationArm{}, true, {}},
  };
  app.elements = {Element::pibs("a", "b", "c", "d"), Element::pr("d", theta),
                  Element::pbs("c", "c", "c"), Element::pbs("d", "d", "d")};
  // Forward phases: reflection at the PBS contributes i, the rotated basis
  // additionally carries e^{i theta} on the (x,1) detector.
  Complex eit = std::exp(kI * theta);
  app.detectors = {{ModeLabel::pol("c", Polarization::H), 1.0},
                   {ModeLabel::pol("c", Polarization::V), kI},
                   {ModeLabel::pol("d", Polarization::H), 1.0},
                   {ModeLabel::pol("d", Polarization::V), kI * eit}};
  app.outcome_map = {Meaning{BasisTag::Plus, 0}, Meaning{BasisTag::Plus, 1},
                     Meaning{BasisTag::Cross, 0}, Meaning{BasisTag::Cross, 1}};
  return app;
}

Apparatus preset_mach_zehnder(int n_min, int n_max) {
  if (n_min > -2 || n_max < 3)
    throw ConfigError("mz window must cover [-2, 3]; the boundary slots are "
                      "always empty but required");
  Apparatus app;
  app.name = "mz-xz-bb84";
  app.inputs = {
      {"a", TimeBinArm{n_min, n_max}, false,
       {ModeLabel::time_bin("a", 0), ModeLabel::time_bin("a", 1)}},
      {"b", TimeBinArm{n_min, n_max}, true, {}},
  };
  // Upper path: one-slot detour; two mirror reflections compensated by a
  // fixed pi shift, so the net detour phase is +1.
  app.elements = {Element::bs("a", "b", "lo", "up"),
                  Element::mirror("up"),
                  Element::mirror("up"),
                  Element::phase_shift("up", std::numbers::pi),
                  Element::delay("up", 1),
                  Element::bs("lo", "up", "s", "d")};
  for (int n = 0; n <= 2; ++n)
    app.detectors.push_back({ModeLabel::time_bin("s", n), 1.0});
  for (int n = 0; n <= 2; ++n)
    app.detectors.push_back({ModeLabel::time_bin("d", n), 1.0});
  app.outcome_map = {Meaning{BasisTag::Z, 0}, Meaning{BasisTag::X, 1},
                     Meaning{BasisTag::Z, 1}, Meaning{BasisTag::Z, 0},
                     Meaning{BasisTag::X, 0}, Meaning{BasisTag::Z, 1}};
  return app;
}

Apparatus preset_by_name(const std::string& name) {
  if (name == "polarization-bb84") return preset_polarization();
  if (name == "mz-xz-bb84") return preset_mach_zehnder();
  throw ConfigError("unknown scheme '" + name +
                    "' (expected polarization-bb84 or mz-xz-bb84)");
}

namespace {

ArmKind arm_kind_from_json(const nlohmann::json& j, const std::string& arm) {
  if (j.is_string() && j.get<std::string>() == "polarization") return PolarizationArm{};
  if (j.is_object() && j.contains("time_bin")) {
    const auto& w = j.at("time_bin");
    if (w.is_array() && w.size() == 2)
      return TimeBinArm{w[0].get<int>(), w[1].get<int>()};
  }
  throw ConfigError("arm '" + arm +
                    "': kind must be \"polarization\" or {\"time_bin\": [lo, hi]}");
}

Element element_from_json(const nlohmann::json& j, std::size_t index) {
  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError("element #" + std::to_string(index + 1) + ": " + msg);
  };
  if (!j.is_object() || !j.contains("type")) throw fail("missing type");
  std::string type = j.at("type").get<std::string>();
  try {
    if (type == "pibs" || type == "bs") {
      auto in = j.at("in"), out = j.at("out");
      if (in.size() != 2 || out.size() != 2) throw fail("needs two in and two out arms");
      auto make = type == "pibs" ? Element::pibs : Element::bs;
      return make(in[0].get<std::string>(), in[1].get<std::string>(),
                  out[0].get<std::string>(), out[1].get<std::string>());
    }
    if (type == "pbs")
      return Element::pbs(j.at("in").get<std::string>(),
                          j.at("transmit").get<std::string>(),
                          j.at("reflect").get<std::string>());
    if (type == "pr") return Element::pr(j.at("arm").get<std::string>(),
                                         j.value("theta", 0.0));
    if (type == "phase")
      return Element::phase_shift(j.at("arm").get<std::string>(), j.at("phi").get<double>());
    if (type == "delay")
      return Element::delay(j.at("arm").get<std::string>(), j.at("slots").get<int>());
    if (type == "mirror") return Element::mirror(j.at("arm").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("bad fields for '") + type + "': " + e.what());
  }
  throw fail("unknown element type '" + type + "'");
}

}  // namespace

Apparatus apparatus_from_json(const nlohmann::json& j) {
  try {
    Apparatus app;
    app.name = j.value("name", "custom");
    for (const auto& in : j.at("inputs")) {
      InputArm arm;
      arm.arm = in.at("arm").get<std::string>();
      arm.kind = arm_kind_from_json(in.at("kind"), arm.arm);
      arm.blocked = in.value("blocked", false);
      if (in.contains("driven"))
        for (const auto& d : in.at("driven"))
          arm.driven_modes.push_back(parse_mode_label(d.get<std::string>()));
      app.inputs.push_back(std::move(arm));
    }
    const auto& elems = j.at("elements");
    for (std::size_t i = 0; i < elems.size(); ++i)
      app.elements.push_back(element_from_json(elems[i], i));
    for (const auto& d : j.at("detectors")) {
      DetectorState det;
      det.mode = parse_mode_label(d.at("mode").get<std::string>());
      if (d.contains("phase")) {
        const auto& p = d.at("phase");
        if (!p.is_array() || p.size() != 2)
          throw ConfigError("detector phase must be [re, im]");
        det.phase = Complex(p[0].get<double>(), p[1].get<double>());
      }
      app.detectors.push_back(det);
      app.outcome_map.push_back(parse_outcome(d.at("meaning").get<std::string>()));
    }
    return app;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("apparatus config: ") + e.what());
  }
}

}  // namespace qkd
