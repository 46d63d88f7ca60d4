#pragma once

// Full wave-packet experiments: a Gaussian packet launched at the lattice,
// an optional depth ramp while it sits between the mirrors, and the time
// series of where the probability goes.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "finlat/local_bands.hpp"
#include "finlat/propagator.hpp"

namespace finlat {

enum class RampTrigger {
  kFixedTime,      // ramp midpoint at ExperimentConfig::trigger_time
  kFreeFlight,     // midpoint when a free particle from z0 would reach z = 0
  kPilotCrossing,  // static pilot run finds when <z> in the cavity crosses 0
  kMeanCrossing,   // ramp starts as soon as <z> in the cavity crosses 0
};

struct ExperimentConfig {
  LatticeGeometry geometry;
  GaussianPacket packet;
  double depth_before = 9.0;
  double depth_after = 9.0;
  double ramp_duration = 0.0;  // 0: static lattice
  RampTrigger trigger = RampTrigger::kPilotCrossing;
  double trigger_time = 0.0;   // kFixedTime only
  /// Explicit depth schedule in absolute time. Replaces the trigger and the
  /// depth fields above; its first and last depths play their roles.
  std::optional<RampSchedule> schedule;

  SpatialGrid grid;
  double dt = 0.05;
  double t_final = 0.0;
  double sample_interval = 1.0;
  /// Stop once the lattice has been entered and has emptied below this.
  std::optional<double> stop_when_lattice_below;

  bool record_carpet = false;
  double carpet_interval = 10.0;
  double carpet_bin = 4.0 * constants::pi;

  /// Overrides the cavity found from the post-ramp band map (inner edges;
  /// the trap window then equals it).
  std::optional<Interval> cavity_window;
};

struct ObservableSeries {
  std::vector<double> times;
  std::vector<double> depth;
  std::vector<double> norm_in_cavity;    // between the inner mirror edges
  std::vector<double> norm_trapped;      // between the outer mirror edges
  std::vector<double> norm_transmitted;  // absorbed right plus anything beyond +lattice edge
  std::vector<double> norm_reflected;
  std::vector<double> mean_position;
  std::vector<double> mean_momentum;
  std::vector<double> energy;

  std::size_t size() const { return times.size(); }
  double in_flight(std::size_t i) const {
    return 1.0 - norm_in_cavity[i] - norm_transmitted[i] - norm_reflected[i];
  }
};

struct DensityCarpet {
  std::vector<double> times;
  std::vector<double> z;          // bin centres
  std::vector<double> density;    // times.size() x z.size(), row major
};

struct ExperimentResult {
  ObservableSeries series;
  std::optional<DensityCarpet> carpet;
  RampSchedule schedule;
  std::optional<double> ramp_midpoint;
  std::optional<CavityGeometry> cavity;  // after the ramp
  Interval cavity_window{0.0, 0.0};  // inner mirror edges
  Interval trap_window{0.0, 0.0};    // outer mirror edges
  double lattice_edge = 0.0;  // see lattice_region()
  WavePacketState final_state;
  double transmitted = 0.0;
  double reflected = 0.0;
};

struct SampleInfo {
  double depth;
  bool ramp_complete;  // true for a static lattice
};

/// Called at every sample.
using SampleObserver = std::function<void(const WavePacketState&, const SampleInfo&)>;

/// Everything fixed before the propagation starts.
struct ExperimentPlan {
  RampSchedule schedule;
  std::optional<double> ramp_midpoint;  // unset until an online trigger fires
  bool online_trigger = false;
  std::optional<CavityGeometry> cavity;
  Interval cavity_window{0.0, 0.0};
  Interval trap_window{0.0, 0.0};
  Interval trigger_window{0.0, 0.0};
  double lattice_edge = 0.0;
};

/// Cavity after the ramp, windows and ramp timing. A pilot trigger runs the
/// static propagation here.
ExperimentPlan plan_experiment(const ExperimentConfig& config);

/// Half-width of the bookkeeping region: the lattice (depth above 2e-11 V0)
/// and the whole initial packet. Probability beyond it counts as transmitted
/// or reflected.
double lattice_region(const LatticeGeometry& geometry, const GaussianPacket& packet);

/// Recoil-unit grid covering the packet start, the lattice and the absorbers
/// with dz at most `max_dz`.
SpatialGrid experiment_grid(const LatticeGeometry& geometry, const GaussianPacket& packet,
                            double max_dz = constants::pi / 8.0);

/// Throws DomainError when the packet loses more than 1e-6 to the absorbers
/// before it reaches the lattice.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const SampleObserver& observer = {});
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentPlan& plan,
                                const SampleObserver& observer = {});

/// Midpoint of the ramp for the configured trigger (recoil time units).
double ramp_midpoint(const ExperimentConfig& config, const Interval& window);

/// First time after `t_start` at which the trapped norm falls below 1/e of
/// its value at `t_start`; unset if it stays above within the run.
std::optional<double> trap_lifetime(const ObservableSeries& series, double t_start);

inline constexpr double kConvergenceTolerance = 1e-6;

struct ConvergenceGate {
  std::string name;     // "dt" or "dz"
  double l2_change;     // final-state L2 difference after halving, global phase removed
  double tolerance;
  bool pass;
  double global_phase;  // phase of <base|refined> (rad)
};

struct ConvergenceReport {
  double horizon;
  std::vector<ConvergenceGate> gates;
  double norm_drift;    // |total probability - 1| at the horizon
  bool pass() const {
    for (const auto& g : gates) {
      if (!g.pass) return false;
    }
    return true;
  }
};

/// Propagates to `horizon` (rounded up to whole steps) with the configured dt
/// and grid, with dt halved, and with dz halved on the same box, and compares
/// the final states up to a global phase.
ConvergenceReport convergence_gates(const ExperimentConfig& config, double horizon,
                                    double tolerance = kConvergenceTolerance);

enum class Trapping { kQuantum, kClassical, kUntrapped };

struct TrappingReport {
  Trapping kind;
  int band;
  double energy_before;
  double energy_after;
};

/// Quantum trapping: the followed Bloch state keeps positive energy and sees
/// a gap at some smaller depth (a mirror pair around the centre).
TrappingReport trapping_condition(double p_in, double depth_before, double depth_after);

inline constexpr double kAdiabaticMargin = 10.0;
inline constexpr double kTravelBoundSeconds = 2e-3;

struct AdiabaticityReport {
  double min_margin;          // min over the ramp of omega^2 / |d omega / dt|
  bool adiabatic;             // min_margin >= kAdiabaticMargin
  double ramp_duration;       // s
  bool within_travel_bound;   // ramp duration <= travel bound
  double shortest_ramp;       // s: duration at which the margin reaches one
};

/// On-site trap frequency omega = 2 sqrt(V0) E_R / hbar.
AdiabaticityReport adiabaticity_check(const RampSchedule& schedule, const RecoilUnits& units,
                                      double travel_bound = kTravelBoundSeconds);

}  // namespace finlat
