#include <doctest.h>

#include <numbers>

#include "qkd/hilbert.hpp"
#include "qkd/io.hpp"
#include "test_helpers.hpp"

using namespace qkd;
using namespace qkd::testing;

TEST_SUITE_BEGIN("hilbert");

TEST_CASE("mode labels order and round-trip") {
  ModeLabel ah = pol("a", Polarization::H);
  ModeLabel av = pol("a", Polarization::V);
  ModeLabel bt = tb("b", -1);
  CHECK(ah < av);
  CHECK(av < bt);
  CHECK(to_string(ah) == "a:H");
  CHECK(to_string(bt) == "b:t-1");
  CHECK(parse_mode_label("a:H") == ah);
  CHECK(parse_mode_label("b:t-1") == bt);
  CHECK(parse_basis_state("V") == BasisState::vacuum());
  CHECK_THROWS_AS(parse_mode_label("a"), ConfigError);
  CHECK_THROWS_AS(parse_mode_label("a:Q"), ConfigError);
  CHECK_THROWS_AS(parse_mode_label(":t1"), ConfigError);
}

TEST_CASE("labeled space is sorted, vacuum first, no duplicates") {
  LabeledSpace space = pulse_space({tb("a", 1), tb("a", 0)});
  CHECK(space.dim() == 3);
  CHECK(space.at(0) == BasisState::vacuum());
  CHECK(space.at(1) == BasisState::photon(tb("a", 0)));
  CHECK_THROWS_AS(LabeledSpace({BasisState::vacuum(), BasisState::vacuum()}), MathError);
}

TEST_CASE("tensor of photon and vacuum pulses") {
  LabeledSpace a = pulse_space({pol("a", Polarization::H), pol("a", Polarization::V)});
  LabeledSpace b = pulse_space({pol("b", Polarization::H), pol("b", Polarization::V)});
  StateVector photon_h = StateVector::unit(a, BasisState::photon(pol("a", Polarization::H)));
  StateVector vac_b = StateVector::unit(b, BasisState::vacuum());

  StateVector joint = tensor(photon_h, vac_b);
  CHECK(joint.space().dim() == 5);
  CHECK(joint.amp(BasisState::photon(pol("a", Polarization::H))) == Complex(1.0));
  CHECK(joint.norm() == doctest::Approx(1.0));

  SUBCASE("vacuum absorbs") {
    StateVector vac_a = StateVector::unit(a, BasisState::vacuum());
    StateVector vv = tensor(vac_a, vac_b);
    CHECK(vv.amp(BasisState::vacuum()) == Complex(1.0));
    CHECK(vv.norm() == doctest::Approx(1.0));
  }
  SUBCASE("superposition times vacuum keeps norm") {
    StateVector plus = from_components(a, {{pol("a", Polarization::H), kInvSqrt2},
                                           {pol("a", Polarization::V), kInvSqrt2}});
    StateVector joint2 = tensor(plus, vac_b);
    CHECK(joint2.norm() == doctest::Approx(1.0));
    CHECK(std::abs(joint2.amp(BasisState::photon(pol("a", Polarization::H))) - kInvSqrt2) <
          1e-15);
  }
  SUBCASE("two-photon components are a hard error") {
    StateVector photon_b =
        StateVector::unit(b, BasisState::photon(pol("b", Polarization::H)));
    CHECK_THROWS_AS(tensor(photon_h, photon_b), MathError);
  }
  SUBCASE("overlapping arms are rejected") {
    CHECK_THROWS_AS(tensor(photon_h, photon_h), MathError);
  }
}

TEST_CASE("tensor is bilinear in the first factor") {
  LabeledSpace a = pulse_space({tb("a", 0), tb("a", 1)});
  LabeledSpace b = pulse_space({tb("b", 0)});
  StateVector vac_b = StateVector::unit(b, BasisState::vacuum());
  RoundRng rng(7, 0);
  for (int trial = 0; trial < 20; ++trial) {
    StateVector s1 = random_state(a, rng);
    StateVector s1p = random_state(a, rng);
    Complex alpha(rng.next_unit(), rng.next_unit());
    Complex beta(rng.next_unit(), rng.next_unit());
    StateVector lhs = tensor(alpha * s1 + beta * s1p, vac_b);
    StateVector rhs = alpha * tensor(s1, vac_b) + beta * tensor(s1p, vac_b);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("identity isometry and adjoint round-trip") {
  LabeledSpace a = pulse_space({tb("a", 0), tb("a", 1), tb("a", 2)});
  Isometry id = Isometry::identity(a);
  RoundRng rng(11, 0);
  StateVector s = random_state(a, rng);
  CHECK((apply(id, s) - s).norm() < 1e-15);
  CHECK((adjoint_apply(id, apply(id, s)) - s).norm() < 1e-15);

  SUBCASE("space mismatch throws") {
    LabeledSpace other = pulse_space({tb("b", 0), tb("b", 1), tb("b", 2)});
    CHECK_THROWS_AS(apply(id, random_state(other, rng)), MathError);
  }
  SUBCASE("non-orthonormal columns are rejected") {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(4, 4) * 1.5;
    CHECK_THROWS_AS(Isometry(a, pulse_space({tb("a", 0), tb("a", 1), tb("a", 2)}), m),
                    MathError);
  }
}

TEST_CASE("equality up to global phase") {
  LabeledSpace a = pulse_space({pol("a", Polarization::H), pol("a", Polarization::V)});
  StateVector h = StateVector::unit(a, BasisState::photon(pol("a", Polarization::H)));
  StateVector v = StateVector::unit(a, BasisState::photon(pol("a", Polarization::V)));
  StateVector rotated = std::exp(kI * 2.0) * h;
  CHECK(states_equal_up_to_global_phase(h, rotated, 1e-9));
  CHECK_FALSE(states_equal_up_to_global_phase(h, v, 1e-9));

  StateVector mix = from_components(a, {{pol("a", Polarization::H), kInvSqrt2},
                                        {pol("a", Polarization::V), kI * kInvSqrt2}});
  CHECK(states_equal_up_to_global_phase(mix, kI * mix, 1e-9));
}

TEST_CASE("projection onto a subspace") {
  LabeledSpace a = pulse_space({tb("a", 0), tb("a", 1), tb("a", 2)});
  Subspace sub = Subspace::from_modes(a, {tb("a", 0), tb("a", 1)});
  CHECK(sub.dim() == 2);

  StateVector inside = from_components(a, {{tb("a", 0), kInvSqrt2}, {tb("a", 1), kInvSqrt2}});
  auto [proj_in, res_in] = project_onto(sub, inside);
  CHECK(res_in < 1e-10);
  CHECK((proj_in - inside).norm() < 1e-10);

  StateVector outside = StateVector::unit(a, BasisState::photon(tb("a", 2)));
  auto [proj_out, res_out] = project_onto(sub, outside);
  CHECK(proj_out.norm() < 1e-12);
  CHECK(res_out == doctest::Approx(1.0));
}

TEST_CASE("gram-schmidt drops dependent spanning vectors") {
  LabeledSpace a = pulse_space({tb("a", 0), tb("a", 1)});
  StateVector v0 = StateVector::unit(a, BasisState::photon(tb("a", 0)));
  StateVector v1 = StateVector::unit(a, BasisState::photon(tb("a", 1)));
  StateVector sum = from_components(a, {{tb("a", 0), kInvSqrt2}, {tb("a", 1), kInvSqrt2}});
  Subspace sub(a, {v0, v1, sum});
  CHECK(sub.dim() == 2);
  Eigen::MatrixXcd gram = sub.basis_matrix().adjoint() * sub.basis_matrix();
  CHECK((gram - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("canonical phase and serialization round-trip") {
  LabeledSpace a = pulse_space({tb("a", 0), tb("a", 1)});
  StateVector s = from_components(a, {{tb("a", 0), Complex(0.0, -kInvSqrt2)},
                                      {tb("a", 1), Complex(kInvSqrt2, 0.0)}});
  StateVector c = s.canonical();
  CHECK(c.amps()[1].real() == doctest::Approx(kInvSqrt2));
  CHECK(std::abs(c.amps()[1].imag()) < 1e-15);
  CHECK(states_equal_up_to_global_phase(s, c, 1e-12));

  RoundRng rng(3, 5);
  for (int trial = 0; trial < 25; ++trial) {
    StateVector r = random_state(a, rng);
    StateVector back = parse_state(serialize_state(r));
    CHECK(back.space() == r.space());
    CHECK(states_equal_up_to_global_phase(r, back, 1e-12));
  }
}

TEST_SUITE_END();
