#include "qkd/hilbert.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace qkd {

std::string to_string(const ModeLabel& m) {
  if (m.is_polarization())
    return m.arm + (std::get<Polarization>(m.kind) == Polarization::H ? ":H" : ":V");
  return m.arm + ":t" + std::to_string(std::get<int>(m.kind));
}

ModeLabel parse_mode_label(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0)
    throw ConfigError("bad mode label '" + std::string(text) + "'");
  std::string arm(text.substr(0, colon));
  std::string_view kind = text.substr(colon + 1);
  if (arm.find(':') != std::string::npos)
    throw ConfigError("arm name may not contain ':' in '" + std::string(text) + "'");
  if (kind == "H") return ModeLabel::pol(arm, Polarization::H);
  if (kind == "V") return ModeLabel::pol(arm, Polarization::V);
  if (!kind.empty() && kind[0] == 't') {
    int slot = 0;
    auto [ptr, ec] = std::from_chars(kind.data() + 1, kind.data() + kind.size(), slot);
    if (ec == std::errc{} && ptr == kind.data() + kind.size())
      return ModeLabel::time_bin(arm, slot);
  }
  throw ConfigError("bad mode kind in label '" + std::string(text) + "'");
}

std::string to_string(const BasisState& b) {
  return b.is_vacuum() ? "V" : to_string(*b.mode);
}

BasisState parse_basis_state(std::string_view text) {
  if (text == "V") return BasisState::vacuum();
  return BasisState::photon(parse_mode_label(text));
}

LabeledSpace::LabeledSpace(std::vector<BasisState> basis) : basis_(std::move(basis)) {
  if (basis_.empty()) throw MathError("labeled space must have dimension >= 1");
  std::sort(basis_.begin(), basis_.end());
  if (std::adjacent_find(basis_.begin(), basis_.end()) != basis_.end())
    throw MathError("duplicate basis state in labeled space");
}

std::optional<int> LabeledSpace::index_of(const BasisState& b) const {
  auto it = std::lower_bound(basis_.begin(), basis_.end(), b);
  if (it == basis_.end() || *it != b) return std::nullopt;
  return static_cast<int>(it - basis_.begin());
}

StateVector::StateVector(LabeledSpace space, Eigen::VectorXcd amplitudes)
    : space_(std::move(space)), amps_(std::move(amplitudes)) {
  if (amps_.size() != space_.dim())
    throw MathError("amplitude vector size does not match space dimension");
}

StateVector StateVector::zero(LabeledSpace space) {
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(space.dim());
  return StateVector(std::move(space), std::move(a));
}

StateVector StateVector::unit(LabeledSpace space, const BasisState& b) {
  auto idx = space.index_of(b);
  if (!idx) throw MathError("basis state " + to_string(b) + " not in space");
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(space.dim());
  a[*idx] = 1.0;
  return StateVector(std::move(space), std::move(a));
}

Complex StateVector::amp(const BasisState& b) const {
  auto idx = space_.index_of(b);
  return idx ? amps_[*idx] : Complex{0.0, 0.0};
}

bool StateVector::is_normalized(double tol) const {
  return std::abs(norm() - 1.0) <= tol;
}

StateVector StateVector::normalized() const {
  double n = norm();
  if (n < kSupportTol) throw MathError("cannot normalize (near-)zero state");
  return StateVector(space_, amps_ / n);
}

StateVector StateVector::canonical() const {
  for (Eigen::Index i = 0; i < amps_.size(); ++i) {
    double mag = std::abs(amps_[i]);
    if (mag > kSupportTol) {
      Complex phase = std::conj(amps_[i]) / mag;
      return StateVector(space_, amps_ * phase);
    }
  }
  return *this;
}

StateVector& StateVector::operator+=(const StateVector& o) {
  if (space_ != o.space_) throw MathError("state addition across different spaces");
  amps_ += o.amps_;
  return *this;
}

StateVector& StateVector::operator-=(const StateVector& o) {
  if (space_ != o.space_) throw MathError("state subtraction across different spaces");
  amps_ -= o.amps_;
  return *this;
}

Complex inner(const StateVector& a, const StateVector& b) {
  if (a.space() != b.space()) throw MathError("inner product across different spaces");
  return a.amps().dot(b.amps());  // Eigen dot conjugates the left factor
}

Isometry::Isometry(LabeledSpace domain, LabeledSpace codomain, Eigen::MatrixXcd matrix)
    : domain_(std::move(domain)), codomain_(std::move(codomain)), matrix_(std::move(matrix)) {
  if (matrix_.rows() != codomain_.dim() || matrix_.cols() != domain_.dim())
    throw MathError("isometry matrix shape does not match its spaces");
  if (codomain_.dim() < domain_.dim())
    throw MathError("isometry codomain smaller than domain");
  Eigen::MatrixXcd gram = matrix_.adjoint() * matrix_;
  gram -= Eigen::MatrixXcd::Identity(domain_.dim(), domain_.dim());
  double dev = gram.cwiseAbs().maxCoeff();
  if (dev > kIsometryTol)
    throw MathError("isometry columns not orthonormal (max deviation " +
                    std::to_string(dev) + ")");
}

Isometry Isometry::identity(LabeledSpace space) {
  Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(space.dim(), space.dim());
  return Isometry(space, space, std::move(id));
}

StateVector apply(const Isometry& iso, const StateVector& s) {
  if (s.space() != iso.domain()) throw MathError("apply: state not in isometry domain");
  return StateVector(iso.codomain(), iso.matrix() * s.amps());
}

StateVector adjoint_apply(const Isometry& iso, const StateVector& s) {
  if (s.space() != iso.codomain())
    throw MathError("adjoint_apply: state not in isometry codomain");
  return StateVector(iso.domain(), iso.matrix().adjoint() * s.amps());
}

Subspace::Subspace(LabeledSpace ambient, const std::vector<StateVector>& spanning)
    : ambient_(std::move(ambient)) {
  basis_.resize(ambient_.dim(), 0);
  for (const auto& v : spanning) {
    if (v.space() != ambient_) throw MathError("spanning vector not in ambient space");
    Eigen::VectorXcd w = v.amps();
    // Two GS passes keep orthogonality well below the drop tolerance.
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index c = 0; c < basis_.cols(); ++c)
        w -= basis_.col(c) * basis_.col(c).dot(w);
    double n = w.norm();
    if (n <= kGramSchmidtDropTol) continue;  // dependent vector
    basis_.conservativeResize(Eigen::NoChange, basis_.cols() + 1);
    basis_.col(basis_.cols() - 1) = w / n;
  }
}

Subspace Subspace::from_modes(const LabeledSpace& ambient,
                              const std::vector<ModeLabel>& modes) {
  std::vector<StateVector> vecs;
  vecs.reserve(modes.size());
  for (const auto& m : modes)
    vecs.push_back(StateVector::unit(ambient, BasisState::photon(m)));
  return Subspace(ambient, vecs);
}

std::vector<StateVector> Subspace::basis_states() const {
  std::vector<StateVector> out;
  out.reserve(static_cast<std::size_t>(dim()));
  for (Eigen::Index c = 0; c < basis_.cols(); ++c)
    out.emplace_back(ambient_, basis_.col(c));
  return out;
}

ProjectionResult project_onto(const Subspace& sub, const StateVector& s) {
  if (s.space() != sub.ambient()) throw MathError("projection: ambient space mismatch");
  Eigen::VectorXcd p = sub.basis_matrix() * (sub.basis_matrix().adjoint() * s.amps());
  double residual = s.amps().squaredNorm() - p.squaredNorm();
  if (residual < 0) residual = 0;
  return {StateVector(sub.ambient(), std::move(p)), residual};
}

StateVector tensor(const StateVector& s1, const StateVector& s2) {
  std::set<std::string> arms1, arms2;
  for (const auto& b : s1.space().basis())
    if (!b.is_vacuum()) arms1.insert(b.mode->arm);
  for (const auto& b : s2.space().basis())
    if (!b.is_vacuum()) arms2.insert(b.mode->arm);
  for (const auto& a : arms1)
    if (arms2.count(a)) throw MathError("tensor: arm '" + a + "' present in both factors");

  const Complex v1 = s1.amp(BasisState::vacuum());
  const Complex v2 = s2.amp(BasisState::vacuum());
  double photons1 = std::sqrt(std::max(0.0, s1.amps().squaredNorm() - std::norm(v1)));
  double photons2 = std::sqrt(std::max(0.0, s2.amps().squaredNorm() - std::norm(v2)));
  if (photons1 * photons2 > kSupportTol)
    throw MathError("tensor: product would populate a two-photon component");

  std::vector<BasisState> joint{BasisState::vacuum()};
  for (const auto& b : s1.space().basis())
    if (!b.is_vacuum()) joint.push_back(b);
  for (const auto& b : s2.space().basis())
    if (!b.is_vacuum()) joint.push_back(b);
  LabeledSpace space(std::move(joint));

  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(space.dim());
  a[*space.index_of(BasisState::vacuum())] = v1 * v2;
  for (const auto& b : s1.space().basis())
    if (!b.is_vacuum()) a[*space.index_of(b)] = s1.amp(b) * v2;
  for (const auto& b : s2.space().basis())
    if (!b.is_vacuum()) a[*space.index_of(b)] = v1 * s2.amp(b);
  return StateVector(std::move(space), std::move(a));
}

bool states_equal_up_to_global_phase(const StateVector& s1, const StateVector& s2,
                                     double tol) {
  if (s1.space() != s2.space()) return false;
  return std::abs(s1.amps().dot(s2.amps())) >= 1.0 - tol;
}

}  // namespace qkd
