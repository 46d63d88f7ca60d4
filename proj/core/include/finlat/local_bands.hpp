#pragma once

// Position-dependent band structure of the finite lattice in the
// infinite-lattice approximation: at every z the atom sees an infinite lattice
// of depth V0 exp(-2 z^2 / w_z^2), with its energy fixed at the free-space
// value E = p^2.
//
// Lengths are in recoil units (1/k_L) unless a name says otherwise.

#include <optional>
#include <span>
#include <vector>

#include "finlat/bloch.hpp"
#include "finlat/units.hpp"

namespace finlat {

inline constexpr double kDefaultKappaMin = 1e-4;
inline constexpr int kDefaultMapPoints = 2048;

/// V0 exp(-2 z^2 / w^2); z and waist in the same unit.
double local_depth(double z, double waist, double peak_depth);

/// Symmetric grid of `n` points over [-half_span, half_span].
std::vector<double> symmetric_grid(double half_span, int n);

class LocalBandMap {
 public:
  LocalBandMap(LatticeGeometry geometry, double peak_depth, std::vector<double> z_grid,
               std::vector<double> p_grid, MonodromySolver solver);

  const LatticeGeometry& geometry() const { return geometry_; }
  double peak_depth() const { return peak_depth_; }
  double waist() const { return waist_; }  // recoil lengths
  const std::vector<double>& z_grid() const { return z_; }
  const std::vector<double>& p_grid() const { return p_; }
  const MonodromySolver& solver() const { return solver_; }

  double im_k(std::size_t iz, std::size_t ip) const { return im_[iz * p_.size() + ip]; }
  double re_k(std::size_t iz, std::size_t ip) const { return re_[iz * p_.size() + ip]; }

  double depth_at(double z) const { return local_depth(z, waist_, peak_depth_); }
  /// Fresh evaluation at any (z, energy); energy need not lie on the grid.
  ComplexK evaluate(double z, double energy) const {
    return solver_.complex_k(depth_at(z), energy);
  }

  /// Non-negative half of the z grid, ascending, starting at z = 0.
  std::vector<double> half_axis() const;

 private:
  friend LocalBandMap build_band_map(const LatticeGeometry&, double, std::vector<double>,
                                     std::vector<double>);
  LatticeGeometry geometry_;
  double peak_depth_;
  double waist_;
  std::vector<double> z_;
  std::vector<double> p_;
  MonodromySolver solver_;
  std::vector<double> im_;
  std::vector<double> re_;
};

/// Evaluates the complex quasimomentum over the (z, p) grid. z in recoil
/// lengths, p in p_R. A grid symmetric about z = 0 is computed on one half and
/// mirrored.
LocalBandMap build_band_map(const LatticeGeometry& geometry, double peak_depth,
                            std::vector<double> p_grid, std::vector<double> z_grid);

/// Default grid: kDefaultMapPoints points over +-4 w_z.
LocalBandMap build_band_map(const LatticeGeometry& geometry, double peak_depth,
                            std::vector<double> p_grid);

/// Im k sampled on the non-negative half of the map grid at one energy.
struct AxisSamples {
  double energy;
  std::vector<double> z;
  std::vector<double> im_k;
};

AxisSamples sample_half_axis(const LocalBandMap& map, double energy);

/// Gap intervals [lo, hi] on z >= 0 where Im k exceeds kappa_min at this
/// energy; edges refined by bisection to `edge_tolerance` recoil lengths.
std::vector<Interval> gap_intervals(const LocalBandMap& map, double energy,
                                    double kappa_min = kDefaultKappaMin,
                                    double edge_tolerance = 1e-3);
std::vector<Interval> gap_intervals(const LocalBandMap& map, const AxisSamples& samples,
                                    double kappa_min = kDefaultKappaMin,
                                    double edge_tolerance = 1e-3);

/// Integral of Im k over [z_lo, z_hi] at fixed energy. Samples on the map
/// grid, with adaptive refinement in cells touching a gap.
double attenuation_integral(const LocalBandMap& map, double energy, double z_lo, double z_hi);
/// Same, over the whole sampled half axis.
double attenuation_integral(const LocalBandMap& map, const AxisSamples& samples);

struct CavityGeometry {
  double energy;       // E_R
  double z_in_left;    // inner mirror edges, recoil lengths
  double z_in_right;
  double z_out_right;  // outer edge of the innermost mirror
  double length;       // z_in_right - z_in_left
  double gap_strength; // integral of Im k across one mirror
};

/// Innermost symmetric mirror pair enclosing an allowed centre, for a free
/// particle of momentum p (energy p^2).
std::optional<CavityGeometry> find_cavity(const LocalBandMap& map, double p,
                                          double kappa_min = kDefaultKappaMin);

std::optional<CavityGeometry> find_cavity_at_energy(const LocalBandMap& map, double energy,
                                                    double kappa_min = kDefaultKappaMin);

/// Adiabatic change of the lattice depth at fixed quasimomentum.
struct AdiabaticFollow {
  int band;
  double quasimomentum;
  double energy_before;
  double energy_after;
};

/// The atom sits in an allowed band at `depth_before`; returns the energy of
/// the same Bloch state at `depth_after`. Throws DomainError inside a gap.
AdiabaticFollow follow_band(double energy, double depth_before, double depth_after);

}  // namespace finlat
