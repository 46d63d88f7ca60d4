#pragma once

// Analytic transmission through the finite lattice: attenuation across the
// gaps, incoherent resummation of multiple reflections between a mirror pair,
// and averaging over a Gaussian momentum distribution.

#include <functional>
#include <span>
#include <vector>

#include "finlat/local_bands.hpp"

namespace finlat {

/// T+ = exp(-2 \int_0^inf Im k(z, p) dz), centre to +infinity.
double half_transmission(const LocalBandMap& map, double p);

/// Mirror pair around an allowed centre: T+/(2 - T+). Single composite
/// barrier: T+^2.
double total_transmission(double t_plus, bool center_in_band);

/// Partial sum T+^2 sum_{n<terms} (1 - T+)^{2n} of the reflection series.
double reflection_series(double t_plus, int terms);

/// Incoherent composition of two barriers: T_a T_b / (1 - R_a R_b).
double compose_incoherent(double t_a, double t_b);

struct TransmissionPoint {
  double p;
  double t_plus;
  double t;
  bool center_in_band;
  int mirrors_per_side;  // gap intervals on z > 0 (central barrier excluded)
  bool multi_gap;        // more than one gap pair traversed
  double reflection() const { return 1.0 - t; }
};

TransmissionPoint transmission_at(const LocalBandMap& map, double p,
                                  double kappa_min = kDefaultKappaMin);

struct AveragedTransmission {
  double value;
  bool truncated;   // p_in - 5 sigma_p < 0: window clipped at p = 0
  bool converged;   // 257 vs 513 point doubling agrees to 1e-6
  int points;
};

/// (1 / sqrt(pi) sigma_p) \int_0^inf T(p) exp(-(p - p_in)^2 / sigma_p^2) dp
/// by trapezoid over p_in +- 5 sigma_p, renormalised over the clipped window.
AveragedTransmission averaged_transmission(const std::function<double(double)>& t_of_p,
                                           double p_in, double sigma_p);

/// Piecewise-linear interpolant over tabulated (p, T) samples; constant
/// extrapolation.
class TabulatedTransmission {
 public:
  TabulatedTransmission(std::vector<double> p, std::vector<double> t);
  double operator()(double p) const;
  const std::vector<double>& p() const { return p_; }
  const std::vector<double>& t() const { return t_; }

 private:
  std::vector<double> p_, t_;
};

struct TransmissionCurve {
  std::vector<double> p_grid;
  std::vector<double> t_mono;
  std::vector<double> t_ave;
  std::vector<bool> multi_gap;
  double sigma_p;
  double peak_depth;
  double w_z;  // m
  int truncated_points = 0;
};

/// Monochromatic transmission at each p_in and its Gaussian average. The
/// average uses a table of T(p) with spacing `table_step` covering the
/// kernel windows.
TransmissionCurve transmission_curve(const LocalBandMap& map, std::span<const double> p_in,
                                     double sigma_p, double table_step = 0.004,
                                     double kappa_min = kDefaultKappaMin);

}  // namespace finlat
