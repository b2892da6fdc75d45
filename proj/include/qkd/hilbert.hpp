#pragma once

#include <Eigen/Dense>
#include <compare>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qkd/errors.hpp"

namespace qkd {

using Complex = std::complex<double>;

// Tolerances shared across the library. All apparatus arithmetic is built
// from exact coefficients (0, ±1/2, ±i/2, 1/sqrt(2)), so these are generous.
inline constexpr double kIsometryTol = 1e-10;       // column orthonormality
inline constexpr double kNormTol = 1e-9;            // state normalization
inline constexpr double kPhaseEqualTol = 1e-9;      // phase-insensitive equality
inline constexpr double kGramSchmidtDropTol = 1e-10;
inline constexpr double kSupportTol = 1e-12;        // amplitude considered zero

enum class Polarization : int { H = 0, V = 1 };

/// One named single-photon optical mode: an arm plus either a polarization
/// or a time-bin slot index. Diagonal polarizations are not labels; they are
/// (H +- V)/sqrt(2) superpositions built where needed.
struct ModeLabel {
  std::string arm;
  std::variant<Polarization, int> kind;  // int = time-bin slot

  bool operator==(const ModeLabel&) const = default;
  std::strong_ordering operator<=>(const ModeLabel& o) const {
    if (auto c = arm <=> o.arm; c != 0) return c;
    if (auto c = kind.index() <=> o.kind.index(); c != 0) return c;
    if (std::holds_alternative<Polarization>(kind))
      return std::get<Polarization>(kind) <=> std::get<Polarization>(o.kind);
    return std::get<int>(kind) <=> std::get<int>(o.kind);
  }

  static ModeLabel pol(std::string arm, Polarization p) { return {std::move(arm), p}; }
  static ModeLabel time_bin(std::string arm, int slot) { return {std::move(arm), slot}; }
  bool is_polarization() const { return std::holds_alternative<Polarization>(kind); }
  bool is_time_bin() const { return std::holds_alternative<int>(kind); }
};

// Label grammar: `V` (vacuum) | `<arm>:<H|V>` | `<arm>:t<signed-int>`.
std::string to_string(const ModeLabel& m);
ModeLabel parse_mode_label(std::string_view text);

/// Basis state of a pulse space: vacuum or a single photon in one mode.
struct BasisState {
  std::optional<ModeLabel> mode;  // empty = vacuum

  static BasisState vacuum() { return {}; }
  static BasisState photon(ModeLabel m) { return {std::move(m)}; }
  bool is_vacuum() const { return !mode.has_value(); }

  bool operator==(const BasisState&) const = default;
  // Vacuum sorts first; photons by (arm, kind).
  std::strong_ordering operator<=>(const BasisState&) const = default;
};

std::string to_string(const BasisState& b);
BasisState parse_basis_state(std::string_view text);

/// Finite-dimensional labeled Hilbert space. The basis is kept sorted in the
/// canonical order (vacuum first, then modes by (arm, kind)); every matrix
/// and serialized state uses this order.
class LabeledSpace {
 public:
  LabeledSpace() = default;
  explicit LabeledSpace(std::vector<BasisState> basis);

  int dim() const { return static_cast<int>(basis_.size()); }
  const std::vector<BasisState>& basis() const { return basis_; }
  const BasisState& at(int i) const { return basis_.at(static_cast<std::size_t>(i)); }
  std::optional<int> index_of(const BasisState& b) const;
  bool contains(const BasisState& b) const { return index_of(b).has_value(); }

  bool operator==(const LabeledSpace&) const = default;

 private:
  std::vector<BasisState> basis_;
};

/// Complex amplitude vector over a labeled space.
class StateVector {
 public:
  StateVector(LabeledSpace space, Eigen::VectorXcd amplitudes);

  static StateVector zero(LabeledSpace space);
  static StateVector unit(LabeledSpace space, const BasisState& b);

  const LabeledSpace& space() const { return space_; }
  const Eigen::VectorXcd& amps() const { return amps_; }
  /// Amplitude of a basis state; 0 when the state is not in the basis.
  Complex amp(const BasisState& b) const;

  double norm() const { return amps_.norm(); }
  bool is_normalized(double tol = kNormTol) const;
  StateVector normalized() const;
  /// Global phase fixed so the first nonzero amplitude (basis order) is
  /// real and strictly positive.
  StateVector canonical() const;

  StateVector& operator+=(const StateVector& o);
  StateVector& operator-=(const StateVector& o);
  StateVector& operator*=(Complex c) { amps_ *= c; return *this; }

  friend StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
  friend StateVector operator-(StateVector a, const StateVector& b) { return a -= b; }
  friend StateVector operator*(Complex c, StateVector s) { return s *= c; }

 private:
  LabeledSpace space_;
  Eigen::VectorXcd amps_;
};

/// <a|b>; conjugates the left argument.
Complex inner(const StateVector& a, const StateVector& b);

/// Inner-product-preserving linear map between labeled spaces.
/// Construction enforces the defining invariant M^dagger M = I.
class Isometry {
 public:
  Isometry(LabeledSpace domain, LabeledSpace codomain, Eigen::MatrixXcd matrix);

  static Isometry identity(LabeledSpace space);

  const LabeledSpace& domain() const { return domain_; }
  const LabeledSpace& codomain() const { return codomain_; }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }

 private:
  LabeledSpace domain_;
  LabeledSpace codomain_;
  Eigen::MatrixXcd matrix_;
};

StateVector apply(const Isometry& iso, const StateVector& s);
StateVector adjoint_apply(const Isometry& iso, const StateVector& s);

/// Subspace of an ambient labeled space, stored as an orthonormal basis.
/// Spanning vectors are Gram-Schmidt orthonormalized; dependent vectors
/// (residual below the drop tolerance) are silently dropped.
class Subspace {
 public:
  Subspace(LabeledSpace ambient, const std::vector<StateVector>& spanning);

  static Subspace from_modes(const LabeledSpace& ambient,
                             const std::vector<ModeLabel>& modes);

  const LabeledSpace& ambient() const { return ambient_; }
  int dim() const { return static_cast<int>(basis_.cols()); }
  /// ambient.dim() x dim() matrix with orthonormal columns.
  const Eigen::MatrixXcd& basis_matrix() const { return basis_; }
  std::vector<StateVector> basis_states() const;

 private:
  LabeledSpace ambient_;
  Eigen::MatrixXcd basis_;
};

struct ProjectionResult {
  StateVector projection;      // unnormalized
  double residual_norm_sq;     // |s|^2 - |projection|^2, clamped at 0
};

ProjectionResult project_onto(const Subspace& sub, const StateVector& s);

/// Product state in the truncated (at most one photon) joint space.
/// Vacuum x Vacuum -> Vacuum, photon x Vacuum -> photon; any two-photon
/// component above kSupportTol is a hard error.
StateVector tensor(const StateVector& s1, const StateVector& s2);

/// True iff |<s1|s2>| >= 1 - tol. Space mismatch compares false.
bool states_equal_up_to_global_phase(const StateVector& s1, const StateVector& s2,
                                     double tol = kPhaseEqualTol);

}  // namespace qkd
