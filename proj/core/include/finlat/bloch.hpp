#pragma once

// Spectrum of the infinite lattice V(x) = -V0 cos^2(x) in recoil units.
//
// Two independent routes are provided:
//  * plane-wave diagonalization of the Bloch Hamiltonian at real quasimomentum
//  * the single-period monodromy (transfer) matrix, which yields the complex
//    quasimomentum at any real energy
// Energies keep the -V0/2 offset of cos^2, so E = p^2 matches the free region.

#include <array>
#include <span>
#include <vector>

#include "finlat/units.hpp"

namespace finlat {

inline constexpr int kDefaultBasisSize = 31;

/// Bloch eigenvalues at quasimomentum k (units of k_L), lowest `n_bands`,
/// ascending. The basis is escalated in steps of 4 until the requested bands
/// move by less than 1e-10 E_R.
std::vector<double> diagonalize_bloch(double depth, double k, int n_bands,
                                      int basis_size = kDefaultBasisSize);

/// Single band energy E_n(k), band numbering from 1.
double band_energy(double depth, int band, double k);

struct BlochBands {
  double depth;
  std::vector<double> k_grid;
  /// energies[n][i] = E_{n+1}(k_grid[i]).
  std::vector<std::vector<double>> energies;
  int basis_size;
};

BlochBands compute_bands(double depth, std::span<const double> k_grid, int n_bands,
                         int basis_size = kDefaultBasisSize);

struct Interval {
  double lo;
  double hi;
  double width() const { return hi - lo; }
};

/// Allowed energy intervals of the lowest `n_bands` bands from the band
/// extrema at k = 0 and k = k_L.
std::vector<Interval> allowed_bands_planewave(double depth, int n_bands);

/// Returns m*/m = 2 / (d^2E/dk^2). Throws DivergentMass at an inflection.
double effective_mass(double depth, int band, double k);

/// Group velocity in units of p_R/m (free particle: v = k).
double group_velocity(double depth, int band, double k);

class DivergentMass : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

using Matrix2 = std::array<std::array<double, 2>, 2>;

/// Even (u) and odd (v) solutions about a lattice minimum, evaluated at the
/// cell boundary x = pi/2. With W = u v' - u' v = 1 the half trace of the
/// monodromy matrix is u v' + u' v, and band edges are the zeros of u, u',
/// v and v'.
struct HalfCell {
  double u, du, v, dv;
  double half_trace() const { return u * dv + du * v; }
  double wronskian() const { return u * dv - du * v; }
};

struct ComplexK {
  double re_k;  // quasimomentum in an allowed band; 0 or 1 (zone centre/edge) in a gap
  double im_k;  // attenuation rate, units of k_L
  bool in_gap() const { return im_k > 0.0; }
};

/// Fixed-step RK4 integrator of -psi'' + V psi = E psi across the lattice cell.
/// The potential samples at the RK4 nodes are shared by every (depth, E) query.
class MonodromySolver {
 public:
  explicit MonodromySolver(int steps_per_period = 1024);

  /// Step-doubling calibrated solver: doubles the step count until the half
  /// trace changes by less than `tolerance` at the stiffest point of the
  /// (depth, energy) box.
  static MonodromySolver calibrated(double max_depth, double max_energy,
                                    double tolerance = 1e-10);

  int steps_per_period() const { return steps_; }

  /// Full-period monodromy matrix, columns are the two fundamental solutions.
  Matrix2 monodromy(double depth, double energy) const;
  HalfCell half_cell(double depth, double energy) const;
  double half_trace(double depth, double energy) const {
    return half_cell(depth, energy).half_trace();
  }
  ComplexK complex_k(double depth, double energy) const;

  /// Sorted band edges in [e_min, e_max]: simple roots of u, u', v, v'.
  std::vector<double> band_edges(double depth, double e_min, double e_max,
                                 double scan_step = 0.02) const;

  /// Allowed intervals between consecutive band edges, starting from the
  /// bottom of the lowest band.
  std::vector<Interval> allowed_bands(double depth, int n_bands) const;

 private:
  int steps_;
  std::vector<double> cos2_;  // cos^2 at half-step nodes over one period
};

ComplexK complex_from_half_trace(double half_trace);

struct ComplexDispersion {
  double depth;
  std::vector<double> energy_grid;
  std::vector<double> im_k;
  std::vector<double> re_k;
};

ComplexDispersion complex_dispersion(const MonodromySolver& solver, double depth,
                                     std::span<const double> energy_grid);

/// Band index (from 1) holding `energy` at this depth, or 0 if the energy is
/// in a gap or below the lowest band.
int band_index(double depth, double energy, int max_band = 12);

}  // namespace finlat
