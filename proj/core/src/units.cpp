#include "finlat/units.hpp"

#include <cmath>

namespace finlat {

using constants::hbar;
using constants::pi;

LatticeGeometry lattice_from_beams(double wavelength, double angle, double waist) {
  if (!(wavelength > 0.0)) throw DomainError("beam wavelength must be positive");
  if (!(waist > 0.0)) throw DomainError("beam waist must be positive");
  if (!(angle > 0.0 && angle <= pi)) {
    throw DomainError("crossing angle must lie in (0, pi]; got " + std::to_string(angle));
  }
  const double k_b = 2.0 * pi / wavelength;
  const double half = 0.5 * angle;
  LatticeGeometry g;
  g.k_L = k_b * std::sin(half);
  g.period = pi / g.k_L;
  // cos(pi/2) is not exactly zero in floating point; the counter-propagating
  // limit has an effectively unbounded axial envelope.
  g.w_z = waist / std::cos(half);
  g.w_perp = waist / std::sin(half);
  g.beams = BeamParameters{wavelength, angle, waist};
  return g;
}

LatticeGeometry lattice_from_period(double period, double w_z) {
  if (!(period > 0.0)) throw DomainError("lattice period must be positive");
  if (!(w_z > 0.0)) throw DomainError("axial waist w_z must be positive");
  LatticeGeometry g;
  g.k_L = pi / period;
  g.period = period;
  g.w_z = w_z;
  return g;
}

BeamParameters infer_beams(const LatticeGeometry& geometry, double wavelength) {
  const double k_b = 2.0 * pi / wavelength;
  const double s = geometry.k_L / k_b;
  if (!(s > 0.0 && s <= 1.0)) {
    throw DomainError("lattice wave number exceeds the beam wave number");
  }
  const double half = std::asin(s);
  return {wavelength, 2.0 * half, geometry.w_z * std::cos(half)};
}

RecoilUnits recoil_units(const LatticeGeometry& geometry, double mass) {
  if (!(mass > 0.0)) throw DomainError("mass must be positive");
  RecoilUnits u;
  u.mass = mass;
  u.p_R = hbar * geometry.k_L;
  u.E_R = u.p_R * u.p_R / (2.0 * mass);
  u.t_R = hbar / u.E_R;
  u.x_R = 1.0 / geometry.k_L;
  return u;
}

TransverseGuide make_guide(double depth, double waist, double mass) {
  if (!(depth > 0.0) || !(waist > 0.0) || !(mass > 0.0)) {
    throw DomainError("guide depth, waist and mass must be positive");
  }
  TransverseGuide g{depth, waist, mass, 0.0, 0.0};
  g.omega_ho = std::sqrt(4.0 * depth / (mass * waist * waist));
  g.a_ho = std::sqrt(hbar / (mass * g.omega_ho));
  return g;
}

RegimeCheck validate_1d_regime(const TransverseGuide& guide, double total_energy) {
  const double quantum = hbar * guide.omega_ho;
  const double margin = total_energy / quantum;
  return {total_energy < quantum, margin};
}

}  // namespace finlat
