#pragma once

// Physical constants, lattice geometry and the recoil unit system.
//
// Everything downstream of this header works in recoil units:
//   length   x_R = 1/k_L
//   momentum p_R = hbar k_L
//   energy   E_R = p_R^2 / 2m
//   time     t_R = hbar / E_R
// In these units the axial Hamiltonian reads H = -d^2/dx^2 + V(x), the lattice
// period is pi and a plane wave e^{ikx} has energy k^2 and velocity 2k.

#include <optional>
#include <stdexcept>
#include <string>

namespace finlat {

namespace constants {
// CODATA 2018
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double rb87_mass = 86.909180527 * atomic_mass_unit;  // kg
inline constexpr double pi = 3.14159265358979323846;
}  // namespace constants

/// Raised for inputs outside an operation's domain (bad geometry, negative
/// masses, malformed schedules). Configuration errors derive from this.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical gate fails (truncation, norm drift, quadrature
/// that does not converge).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BeamParameters {
  double wavelength;  // lambda_b [m]
  double angle;       // full crossing angle theta [rad]
  double waist;       // w_b [m]
};

/// Geometry of the finite lattice along the guide axis, in SI.
struct LatticeGeometry {
  double k_L;     // lattice wave number [1/m]
  double period;  // P = pi / k_L [m]
  double w_z;     // axial envelope waist [m]
  /// Transverse envelope waist; only known when built from beams.
  std::optional<double> w_perp;
  std::optional<BeamParameters> beams;

  /// Axial waist in recoil lengths (w_z k_L).
  double waist_recoil() const { return w_z * k_L; }
};

/// Two Gaussian beams crossing at `angle`.
LatticeGeometry lattice_from_beams(double wavelength, double angle, double waist);

/// Direct lattice specification by period and axial waist.
LatticeGeometry lattice_from_period(double period, double w_z);

/// Recovers crossing angle and beam waist from a derived geometry and the
/// beam wavelength. Inverse of lattice_from_beams.
BeamParameters infer_beams(const LatticeGeometry& geometry, double wavelength);

struct RecoilUnits {
  double mass;  // kg
  double p_R;   // kg m/s
  double E_R;   // J
  double t_R;   // s
  double x_R;   // m

  double velocity() const { return p_R / mass; }

  double energy_to_si(double e) const { return e * E_R; }
  double energy_from_si(double e) const { return e / E_R; }
  double length_to_si(double x) const { return x * x_R; }
  double length_from_si(double x) const { return x / x_R; }
  double time_to_si(double t) const { return t * t_R; }
  double time_from_si(double t) const { return t / t_R; }
  double momentum_to_si(double p) const { return p * p_R; }
  double momentum_from_si(double p) const { return p / p_R; }
  /// Simulation velocity unit is x_R / t_R = p_R / 2m.
  double velocity_to_si(double v) const { return v * x_R / t_R; }
};

RecoilUnits recoil_units(const LatticeGeometry& geometry, double mass);

/// Red-detuned guide beam providing the transverse confinement.
struct TransverseGuide {
  double depth;  // V_g [J]
  double waist;  // w_g [m]
  double mass;   // kg
  double omega_ho;
  double a_ho;
};

TransverseGuide make_guide(double depth, double waist, double mass);

struct RegimeCheck {
  bool valid;
  double margin;  // E / (hbar omega_ho)
};

/// The 1D reduction holds while the total energy stays strictly below one
/// transverse oscillator quantum.
RegimeCheck validate_1d_regime(const TransverseGuide& guide, double total_energy);

}  // namespace finlat
