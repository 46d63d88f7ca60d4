#pragma once

// Collapse and revival of a wave packet bouncing between two mirrors:
// fidelity traces, revival detection, power-law fits over sweeps, the
// hard-wall box reference and the effective-mass estimate of the revival time.

#include <optional>
#include <span>
#include <vector>

#include "finlat/experiment.hpp"
#include "finlat/local_bands.hpp"
#include "finlat/propagator.hpp"

namespace finlat {

inline constexpr double kCollapseThreshold = 0.2;
inline constexpr double kRevivalThreshold = 0.5;

/// Hard-wall box of length L: T_rev = 4 m L^2 / (pi hbar), specular revival
/// at T_rev / 2, revival of symmetric states at T_rev / 8. SI units.
struct BoxWellPrediction {
  double length;
  double mass;
  double t_rev;
  double t_spec;
  double t_sym;
};

BoxWellPrediction box_revival_times(double length, double mass);

/// |<ref|psi>|^2 / (<ref|ref> <psi|psi>). Throws DomainError on a grid mismatch.
double amplitude_fidelity(const WavePacketState& reference, const WavePacketState& state);

/// Coarse-grained densities inside a window: bins of width `bin` centred
/// symmetrically about the window centre.
class DensityProfile {
 public:
  DensityProfile(const SpatialGrid& grid, Interval window, double bin);
  std::vector<double> operator()(const WavePacketState& state) const;
  std::size_t bins() const { return count_; }

 private:
  SpatialGrid grid_;
  double lo_ = 0.0, bin_ = 0.0;
  std::size_t count_ = 0;
};

/// Overlap of two mean-subtracted binned densities a, b:
/// sum(a b) / max(sum(a^2), sum(b^2)), clipped to [0, 1]. Equals 1 only for
/// identical profiles and falls towards 0 as the density flattens out.
/// `mirrored` reverses the reference about the window centre.
double density_correlation(std::span<const double> reference, std::span<const double> density,
                           bool mirrored = false);

struct FidelitySample {
  double time;
  double amplitude;
  double density;           // direct density correlation
  double density_mirrored;  // against the mirror image of the reference
  double signal() const { return density > density_mirrored ? density : density_mirrored; }
};

/// Accumulates fidelity samples against a fixed reference, usable as a
/// SampleObserver body.
class FidelityTracker {
 public:
  FidelityTracker(WavePacketState reference, Interval window, double bin = 4.0 * constants::pi);
  FidelitySample sample(const WavePacketState& state) const;
  void add(const WavePacketState& state) { trace_.push_back(sample(state)); }
  const std::vector<FidelitySample>& trace() const { return trace_; }
  const WavePacketState& reference() const { return reference_; }

 private:
  WavePacketState reference_;
  DensityProfile profile_;
  std::vector<double> ref_density_;
  std::vector<FidelitySample> trace_;
};

std::vector<FidelitySample> fidelity_trace(const WavePacketState& reference,
                                           std::span<const WavePacketState> states,
                                           Interval window, double bin = 4.0 * constants::pi);

struct RevivalDetection {
  std::optional<double> collapse_time;
  std::vector<double> revival_times;
  std::vector<double> revival_values;
  std::optional<double> t_rev;
  double quality = 0.0;  // signal at t_rev
};

/// Collapse: first time after the start where the signal drops below
/// `collapse_threshold`. Revivals: local maxima above `revival_threshold`
/// after the collapse, at least `min_separation` apart (the higher peak wins).
RevivalDetection detect_revivals(std::span<const double> times, std::span<const double> values,
                                 double collapse_threshold = kCollapseThreshold,
                                 double revival_threshold = kRevivalThreshold,
                                 double min_separation = 0.0);

/// Running maximum of a trace over a centred window of one period, so that
/// a packet bouncing between the mirrors counts once per round trip.
std::vector<double> round_trip_envelope(std::span<const double> times,
                                        std::span<const double> values, double period);

/// Median spacing of upward zero crossings of a centre-of-mass trace.
std::optional<double> oscillation_period(std::span<const double> times,
                                         std::span<const double> mean_z);

/// Distance between the extremal turning points of <z> within
/// [t_start, t_start + duration].
std::optional<double> turning_point_length(std::span<const double> times,
                                           std::span<const double> mean_z, double t_start,
                                           double duration);

struct PowerLawFit {
  double exponent;
  double prefactor;
  double exponent_stderr;
  double quadratic_prefactor;    // best a for y = a x^2
  double quadratic_rms_residual; // RMS of y / (a x^2) - 1
};

/// Log-log least squares for y = a x^b plus the fixed b = 2 fit.
PowerLawFit scaling_fit(std::span<const double> x, std::span<const double> y);

struct LinearFit {
  double slope;
  double intercept;
  double rms_relative_residual;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

enum class QuasimomentumModel {
  kEnergyConservation,  // q(z) from E_n(q; V(z)) = E at every z
  kCentral,             // q fixed at its value at the centre
};

struct MassPrediction {
  double mass_ratio;          // m*_avg / m
  double t_rev;               // recoil time units
  double sensitivity;         // relative change when v_min doubles
  double excluded_fraction;   // share of the interior with |v_g| < v_min
  bool reliable;
  int band;
};

/// Group-velocity weighted effective mass over the cavity interior and
/// T_rev = 4 m*_avg L^2 / (pi hbar), with L = cavity.length. Velocities in
/// units of p_R / m.
MassPrediction effective_mass_prediction(const LocalBandMap& map, const CavityGeometry& cavity,
                                         double energy, double v_min = 0.01,
                                         QuasimomentumModel model =
                                             QuasimomentumModel::kEnergyConservation);

struct RevivalReport {
  std::vector<FidelitySample> trace;    // from the end of the ramp
  std::vector<double> trapped_mean_z;   // <z> inside the trap window, per trace sample
  std::vector<double> envelope;         // round-trip envelope of FidelitySample::signal()
  RevivalDetection detection;           // on the envelope
  std::optional<double> round_trip;     // period of the trapped <z> oscillation
  std::optional<double> cavity_length_measured;  // first three round trips
  double reference_time = 0.0;
};

struct RevivalRun {
  ExperimentResult experiment;
  RevivalReport report;
};

/// Runs the experiment with the fidelity reference taken at the end of the
/// ramp, over the trap window. Throws DomainError when no cavity forms.
RevivalRun run_revival_experiment(const ExperimentConfig& config,
                                  double collapse_threshold = kCollapseThreshold,
                                  double revival_threshold = kRevivalThreshold,
                                  double bin = 4.0 * constants::pi);
RevivalRun run_revival_experiment(const ExperimentConfig& config, const ExperimentPlan& plan,
                                  double collapse_threshold = kCollapseThreshold,
                                  double revival_threshold = kRevivalThreshold,
                                  double bin = 4.0 * constants::pi);

/// Box-well propagation check in recoil units of the given lattice.
struct BoxOracleConfig {
  double length;          // recoil lengths
  std::size_t points = 1023;
  double packet_width = 0.03;   // position std as a fraction of the length
  double start = 0.3;           // centre as a fraction of the length
  double momentum = 0.0;        // p_R
  std::size_t samples = 8000;   // over 1.25 T_rev
};

struct BoxOracleResult {
  double t_rev_predicted;   // recoil time units, 2 L^2 / pi
  std::optional<double> t_rev_measured;
  std::optional<double> t_sym_measured;
  double specular_correlation;      // mirrored density correlation at T_rev / 2
  double fidelity_at_rev;
  double fidelity_at_sym;
  RevivalDetection detection;
  std::vector<double> trace_times;     // amplitude fidelity of the moving packet
  std::vector<double> trace_fidelity;
};

BoxOracleResult run_box_oracle(const BoxOracleConfig& config);

}  // namespace finlat
