#include <cmath>

#include "doctest.h"
#include "finlat/units.hpp"

using namespace finlat;
using constants::pi;

namespace {
constexpr double deg = pi / 180.0;
constexpr double nm = 1e-9;
constexpr double um = 1e-6;
}  // namespace

TEST_CASE("beam crossing at 94 degrees gives a 50 um axial waist") {
  const auto g = lattice_from_beams(1064 * nm, 94 * deg, 34 * um);
  CHECK(g.w_z / um == doctest::Approx(34.0 / std::cos(47 * deg)).epsilon(1e-12));
  CHECK(g.w_z / um == doctest::Approx(50.0).epsilon(0.01));
  // Direct evaluation of lambda_b / (2 sin(theta/2)); differs from the 390 nm
  // lattice used for simulation presets.
  CHECK(g.period / nm == doctest::Approx(727.4).epsilon(1e-3));
  CHECK(g.w_perp.value() / um == doctest::Approx(34.0 / std::sin(47 * deg)).epsilon(1e-12));
}

TEST_CASE("counter-propagating beams give half-wavelength period") {
  const auto g = lattice_from_beams(1064 * nm, pi, 34 * um);
  CHECK(g.period / nm == doctest::Approx(532.0).epsilon(1e-12));
}

TEST_CASE("degenerate crossing angles are rejected") {
  CHECK_THROWS_AS(lattice_from_beams(1064 * nm, 0.0, 34 * um), DomainError);
  CHECK_THROWS_AS(lattice_from_beams(1064 * nm, -0.1, 34 * um), DomainError);
  CHECK_THROWS_AS(lattice_from_beams(1064 * nm, pi + 1e-9, 34 * um), DomainError);
  CHECK_THROWS_AS(lattice_from_beams(-1.0, 1.0, 34 * um), DomainError);
  CHECK_THROWS_AS(lattice_from_period(390 * nm, -50 * um), DomainError);
}

TEST_CASE("period falls and axial waist grows with crossing angle") {
  double last_period = INFINITY, last_wz = 0.0;
  for (int i = 1; i <= 179; ++i) {
    const auto g = lattice_from_beams(780 * nm, i * deg, 30 * um);
    CHECK(g.period < last_period);
    CHECK(g.w_z > last_wz);
    last_period = g.period;
    last_wz = g.w_z;
  }
}

TEST_CASE("beam parameters round-trip through the derived geometry") {
  for (double theta_deg : {5.0, 47.0, 94.0, 133.0, 179.0}) {
    const auto g = lattice_from_beams(1064 * nm, theta_deg * deg, 34 * um);
    const auto b = infer_beams(g, 1064 * nm);
    CHECK(b.angle == doctest::Approx(theta_deg * deg).epsilon(1e-12));
    CHECK(b.waist == doctest::Approx(34 * um).epsilon(1e-12));
  }
}

TEST_CASE("recoil units of Rb-87 in a 390 nm lattice") {
  const auto g = lattice_from_period(390 * nm, 50 * um);
  const auto u = recoil_units(g, constants::rb87_mass);
  // hbar k_L / m with k_L = pi / P
  const double v_rec = constants::hbar * (pi / (390 * nm)) / 1.4431608951e-25;
  CHECK(u.velocity() == doctest::Approx(v_rec).epsilon(1e-9));
  CHECK(u.velocity() * 1e3 == doctest::Approx(5.89).epsilon(2e-3));
  // group speed of a free packet at p = 2 p_R, in um/ms
  CHECK(2.0 * u.velocity() == doctest::Approx(11.78e-3).epsilon(2e-3));
  CHECK(u.E_R * u.t_R == doctest::Approx(constants::hbar).epsilon(1e-14));
  CHECK(u.E_R / (2 * pi * constants::hbar) == doctest::Approx(3772.0).epsilon(1e-3));

  const auto heavy = recoil_units(g, 2 * constants::rb87_mass);
  CHECK(heavy.E_R == doctest::Approx(u.E_R / 2).epsilon(1e-14));
  CHECK(heavy.t_R == doctest::Approx(u.t_R * 2).epsilon(1e-14));

  // simulation velocity unit is half the recoil velocity
  CHECK(u.velocity_to_si(2.0) == doctest::Approx(u.velocity()).epsilon(1e-14));

  CHECK_THROWS_AS(recoil_units(g, 0.0), DomainError);
}

TEST_CASE("unit conversions are consistent to 1e-12") {
  const auto u = recoil_units(lattice_from_period(390 * nm, 50 * um), constants::rb87_mass);
  for (double x : {1e-3, 0.37, 9.0, 15.0, 1234.5}) {
    CHECK(u.energy_from_si(u.energy_to_si(x)) == doctest::Approx(x).epsilon(1e-12));
    CHECK(u.length_from_si(u.length_to_si(x)) == doctest::Approx(x).epsilon(1e-12));
    CHECK(u.time_from_si(u.time_to_si(x)) == doctest::Approx(x).epsilon(1e-12));
    CHECK(u.momentum_from_si(u.momentum_to_si(x)) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("1D regime: strict inequality against one transverse quantum") {
  const auto u = recoil_units(lattice_from_period(390 * nm, 50 * um), constants::rb87_mass);
  const auto guide = make_guide(100 * u.E_R, 2 * um, constants::rb87_mass);
  const double quantum = constants::hbar * guide.omega_ho;

  auto r0 = validate_1d_regime(guide, 0.0);
  CHECK(r0.valid);
  CHECK(r0.margin == 0.0);

  auto r1 = validate_1d_regime(guide, quantum);
  CHECK_FALSE(r1.valid);
  CHECK(r1.margin == doctest::Approx(1.0));

  // plug-in: hbar sqrt(4 V_g / (m w_g^2)) against 3 E_R
  const double omega = std::sqrt(4 * 100 * u.E_R / (constants::rb87_mass * 4e-12));
  const double expected_margin = 3 * u.E_R / (constants::hbar * omega);
  auto r2 = validate_1d_regime(guide, 3 * u.E_R);
  CHECK(r2.margin == doctest::Approx(expected_margin).epsilon(1e-12));
  CHECK(r2.valid == (expected_margin < 1.0));
  CHECK(guide.a_ho == doctest::Approx(std::sqrt(constants::hbar / (constants::rb87_mass * omega))));
}
