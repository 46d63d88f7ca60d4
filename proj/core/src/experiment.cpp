#include "finlat/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace finlat {

using constants::pi;

namespace {

// exp(-2 * 3.5^2) = 2e-11: the lattice is negligible beyond 3.5 waists.
constexpr double kLatticeEdgeWaists = 3.5;
constexpr double kTailSigmas = 8.0;
constexpr double kGridTooSmall = 1e-6;

// Copy with the depth fields taken from an explicit schedule.
ExperimentConfig resolved(const ExperimentConfig& c) {
  if (!c.schedule) return c;
  ExperimentConfig r = c;
  const auto& pts = c.schedule->breakpoints();
  r.depth_before = pts.front().second;
  r.depth_after = pts.back().second;
  r.ramp_duration = c.schedule->end() - c.schedule->start();
  return r;
}

std::optional<CavityGeometry> cavity_for(const ExperimentConfig& c) {
  const double p = c.packet.p_in;
  double depth = c.depth_before;
  double energy = p * p;
  if (c.ramp_duration > 0.0 && c.depth_after != c.depth_before) {
    try {
      energy = follow_band(energy, c.depth_before, c.depth_after).energy_after;
    } catch (const DomainError&) {
      return std::nullopt;  // centre in a gap before the ramp
    }
    depth = c.depth_after;
  }
  if (depth <= 0.0) return std::nullopt;
  const auto map = build_band_map(c.geometry, depth, {std::max(std::abs(p), 1e-3)});
  return find_cavity_at_energy(map, energy);
}

double crossing_time(const ExperimentConfig& c, const Interval& window) {
  auto state = initial_gaussian(c.packet, c.grid);
  SplitOperator op(c.grid, lattice_shape(c.grid, c.geometry.waist_recoil()), c.dt);
  const double speed = std::max(2.0 * std::abs(c.packet.p_in), 1e-3);
  const double t_cap = 4.0 * (std::abs(c.packet.z0) + c.geometry.waist_recoil()) / speed;
  constexpr int kCheckEvery = 4;
  double last_t = 0.0;
  double last_mean = std::numeric_limits<double>::quiet_NaN();
  for (long step = 1; state.time < t_cap; ++step) {
    op.step(state, c.depth_before);
    if (step % kCheckEvery != 0) continue;
    if (state.norm_between(window.lo, window.hi) < 1e-3) {
      last_mean = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double mean = state.mean_position_between(window.lo, window.hi);
    if (last_mean < 0.0 && mean >= 0.0) {
      return last_t + (state.time - last_t) * (-last_mean) / (mean - last_mean);
    }
    last_mean = mean;
    last_t = state.time;
  }
  throw DomainError("packet never crosses the cavity centre; check p_in and the depths");
}

struct CarpetBins {
  double lo, width;
  std::size_t count;
};

}  // namespace

double lattice_region(const LatticeGeometry& geometry, const GaussianPacket& packet) {
  return std::max(kLatticeEdgeWaists * geometry.waist_recoil(),
                  std::abs(packet.z0) + kTailSigmas * packet.position_width());
}

SpatialGrid experiment_grid(const LatticeGeometry& geometry, const GaussianPacket& packet,
                            double max_dz) {
  const double tail = kTailSigmas * packet.position_width();
  const double reach = lattice_region(geometry, packet) + tail;
  const double half = reach / 0.8;  // absorbers take the outer 10% of the span
  std::size_t n = 16;
  while (2.0 * half / static_cast<double>(n) > max_dz) n *= 2;
  return SpatialGrid::periodic(-half, half, n);
}

double ramp_midpoint(const ExperimentConfig& c, const Interval& window) {
  switch (c.trigger) {
    case RampTrigger::kFixedTime:
      return c.trigger_time;
    case RampTrigger::kFreeFlight:
      return -c.packet.z0 / (2.0 * c.packet.p_in);
    case RampTrigger::kPilotCrossing:
      return crossing_time(c, window);
    case RampTrigger::kMeanCrossing:
      break;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

namespace {

void validate(const ExperimentConfig& c) {
  if (c.grid.boundary != Boundary::kAbsorbing) {
    throw DomainError("experiments need an absorbing grid");
  }
  if (!(c.dt > 0.0) || !(c.t_final > 0.0) || !(c.sample_interval > 0.0)) {
    throw DomainError("dt, t_final and sample_interval must be positive");
  }
  if (c.depth_before < 0.0 || c.depth_after < 0.0 || c.ramp_duration < 0.0) {
    throw DomainError("depths and ramp duration must be non-negative");
  }
  if (c.grid.dz() > pi / 8.0) throw DomainError("grid spacing exceeds P/8");
  const double edge = lattice_region(c.geometry, c.packet);
  if (c.grid.absorber_right() < edge || c.grid.absorber_left() > -edge) {
    throw DomainError("grid does not cover the lattice region inside the absorbers");
  }
}

}  // namespace

ExperimentPlan plan_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto c = resolved(config);
  ExperimentPlan plan;
  const double w = c.geometry.waist_recoil();
  plan.lattice_edge = lattice_region(c.geometry, c.packet);
  plan.cavity = cavity_for(c);
  if (c.cavity_window) {
    plan.cavity_window = *c.cavity_window;
    plan.trap_window = *c.cavity_window;
  } else if (plan.cavity) {
    plan.cavity_window = {plan.cavity->z_in_left, plan.cavity->z_in_right};
    plan.trap_window = {-plan.cavity->z_out_right, plan.cavity->z_out_right};
  }
  plan.trigger_window = plan.cavity_window.width() > 0.0 ? plan.cavity_window : Interval{-w, w};

  plan.schedule = RampSchedule::constant(c.depth_before);
  const bool ramped = c.ramp_duration > 0.0 && c.depth_after != c.depth_before;
  if (c.schedule) {
    plan.schedule = *c.schedule;
    if (ramped) plan.ramp_midpoint = 0.5 * (c.schedule->start() + c.schedule->end());
  } else if (ramped) {
    if (c.trigger == RampTrigger::kMeanCrossing) {
      plan.online_trigger = true;
    } else {
      const double mid = ramp_midpoint(c, plan.trigger_window);
      plan.ramp_midpoint = mid;
      plan.schedule = RampSchedule::linear_ramp(mid - 0.5 * c.ramp_duration, c.ramp_duration,
                                                c.depth_before, c.depth_after);
    }
  }
  return plan;
}

ExperimentResult run_experiment(const ExperimentConfig& c, const SampleObserver& observer) {
  return run_experiment(c, plan_experiment(c), observer);
}

ExperimentResult run_experiment(const ExperimentConfig& c, const ExperimentPlan& plan,
                                const SampleObserver& observer) {
  validate(c);
  ExperimentResult out;
  const double w = c.geometry.waist_recoil();
  out.lattice_edge = plan.lattice_edge;
  out.cavity = plan.cavity;
  out.cavity_window = plan.cavity_window;
  out.trap_window = plan.trap_window;
  out.schedule = plan.schedule;
  out.ramp_midpoint = plan.ramp_midpoint;
  const Interval trigger_window = plan.trigger_window;
  bool ramp_pending = plan.online_trigger;
  const bool ramped = plan.online_trigger || plan.schedule.end() > plan.schedule.start();

  auto state = initial_gaussian(c.packet, c.grid);
  SplitOperator op(c.grid, lattice_shape(c.grid, w), c.dt);

  CarpetBins bins{};
  if (c.record_carpet) {
    out.carpet.emplace();
    bins.lo = c.grid.absorber_left();
    bins.count = static_cast<std::size_t>(
        std::floor((c.grid.absorber_right() - bins.lo) / c.carpet_bin));
    bins.width = c.carpet_bin;
    for (std::size_t b = 0; b < bins.count; ++b) {
      out.carpet->z.push_back(bins.lo + (static_cast<double>(b) + 0.5) * bins.width);
    }
  }

  auto& s = out.series;
  auto record = [&]() {
    const double depth = out.schedule.depth(state.time);
    s.times.push_back(state.time);
    s.depth.push_back(depth);
    s.norm_in_cavity.push_back(out.cavity_window.width() > 0.0
                                   ? state.norm_between(out.cavity_window.lo,
                                                        out.cavity_window.hi)
                                   : 0.0);
    s.norm_trapped.push_back(out.trap_window.width() > 0.0
                                 ? state.norm_between(out.trap_window.lo, out.trap_window.hi)
                                 : 0.0);
    s.norm_transmitted.push_back(state.absorbed_right +
                                 state.norm_between(out.lattice_edge, c.grid.z_max));
    s.norm_reflected.push_back(state.absorbed_left +
                               state.norm_between(c.grid.z_min, -out.lattice_edge));
    s.mean_position.push_back(state.mean_position());
    s.mean_momentum.push_back(op.mean_momentum(state));
    s.energy.push_back(op.energy(state, depth));
    if (observer) {
      const bool done = !ramped || (!ramp_pending && state.time >= out.schedule.end());
      observer(state, SampleInfo{depth, done});
    }
  };
  auto snapshot = [&]() {
    auto& carpet = *out.carpet;
    carpet.times.push_back(state.time);
    const std::size_t row = carpet.density.size();
    carpet.density.resize(row + bins.count, 0.0);
    const double dz = c.grid.dz();
    for (std::size_t i = 0; i < c.grid.n; ++i) {
      const double b = (c.grid.z(i) - bins.lo) / bins.width;
      if (b < 0.0) continue;
      const auto k = static_cast<std::size_t>(b);
      if (k >= bins.count) continue;
      carpet.density[row + k] += std::norm(state.psi[i]) * dz / bins.width;
    }
  };

  const auto sample_every = std::max<long>(1, std::lround(c.sample_interval / c.dt));
  const auto carpet_every = std::max<long>(1, std::lround(c.carpet_interval / c.dt));
  const long n_steps = static_cast<long>(std::ceil(c.t_final / c.dt - 1e-9));
  const double speed = std::max(2.0 * std::abs(c.packet.p_in), 1e-12);
  const double t_enter = std::max(0.0, (-out.lattice_edge - c.packet.z0) / speed);
  bool entry_checked = false;
  bool entered = false;
  double last_mean = std::numeric_limits<double>::quiet_NaN();

  record();
  if (c.record_carpet) snapshot();
  for (long step = 1; step <= n_steps; ++step) {
    op.step(state, out.schedule.depth(state.time + 0.5 * c.dt));

    if (!entry_checked && state.time >= t_enter) {
      entry_checked = true;
      if (state.absorbed_left + state.absorbed_right > kGridTooSmall) {
        throw DomainError("grid too small: " +
                          std::to_string(state.absorbed_left + state.absorbed_right) +
                          " absorbed before the packet reached the lattice");
      }
    }
    if (ramp_pending) {
      if (state.norm_between(trigger_window.lo, trigger_window.hi) > 1e-3) {
        const double mean = state.mean_position_between(trigger_window.lo, trigger_window.hi);
        if (last_mean < 0.0 && mean >= 0.0) {
          ramp_pending = false;
          out.ramp_midpoint = state.time + 0.5 * c.ramp_duration;
          out.schedule = RampSchedule::linear_ramp(state.time, c.ramp_duration,
                                                   c.depth_before, c.depth_after);
        }
        last_mean = mean;
      } else {
        last_mean = std::numeric_limits<double>::quiet_NaN();
      }
    }

    if (c.record_carpet && step % carpet_every == 0) snapshot();
    if (step % sample_every != 0 && step != n_steps) continue;
    record();
    if (c.stop_when_lattice_below) {
      const double inside = state.norm_between(-out.lattice_edge, out.lattice_edge);
      if (inside > 0.5) entered = true;
      if (entered && inside < *c.stop_when_lattice_below) break;
    }
  }
  out.transmitted = s.norm_transmitted.back();
  out.reflected = s.norm_reflected.back();
  out.final_state = std::move(state);
  return out;
}

ConvergenceReport convergence_gates(const ExperimentConfig& config, double horizon,
                                    double tolerance) {
  if (!(horizon > 0.0)) throw DomainError("convergence horizon must be positive");
  ExperimentConfig c = config;
  // Whole number of base steps so the halved run ends at the same time.
  c.t_final = std::ceil(horizon / c.dt - 1e-9) * c.dt;
  c.record_carpet = false;
  c.stop_when_lattice_below.reset();
  c.sample_interval = c.t_final;
  const auto plan = plan_experiment(c);
  const auto base = run_experiment(c, plan).final_state;

  auto fine_dt = c;
  fine_dt.dt = 0.5 * c.dt;
  const auto half_dt = run_experiment(fine_dt, plan).final_state;

  auto fine_dz = c;
  fine_dz.grid = SpatialGrid::periodic(c.grid.z_min, c.grid.z_max, 2 * c.grid.n);
  const auto half_dz = run_experiment(fine_dz, plan).final_state;

  // Distance after removing the unobservable global phase.
  auto compare = [&](const WavePacketState& fine, std::size_t stride) {
    cplx overlap{0.0, 0.0};
    for (std::size_t i = 0; i < c.grid.n; ++i) overlap += std::conj(base.psi[i]) * fine.psi[stride * i];
    const double phase = std::arg(overlap);
    const cplx undo = std::polar(1.0, -phase);
    double d2 = 0.0;
    for (std::size_t i = 0; i < c.grid.n; ++i) d2 += std::norm(base.psi[i] - undo * fine.psi[stride * i]);
    return std::pair{std::sqrt(d2 * c.grid.dz()), phase};
  };
  const auto [ldt, phase_dt] = compare(half_dt, 1);
  const auto [ldz, phase_dz] = compare(half_dz, 2);
  ConvergenceReport r;
  r.horizon = c.t_final;
  r.norm_drift = std::abs(base.total_probability() - 1.0);
  r.gates.push_back({"dt", ldt, tolerance, ldt < tolerance, phase_dt});
  r.gates.push_back({"dz", ldz, tolerance, ldz < tolerance, phase_dz});
  return r;
}

TrappingReport trapping_condition(double p_in, double depth_before, double depth_after) {
  if (depth_before < 0.0 || depth_after < 0.0) throw DomainError("depths must be non-negative");
  const double energy = p_in * p_in;
  TrappingReport r{Trapping::kUntrapped, 0, energy, energy};
  AdiabaticFollow follow{};
  try {
    follow = follow_band(energy, depth_before, depth_after);
  } catch (const DomainError&) {
    return r;  // the centre reflects; nothing enters to be trapped
  }
  r.band = follow.band;
  r.energy_after = follow.energy_after;
  if (depth_after <= depth_before) return r;
  if (follow.energy_after < 0.0) {
    r.kind = Trapping::kClassical;
    return r;
  }
  // A mirror exists where the shallower wings put this energy in a gap.
  constexpr int kScan = 400;
  for (int i = 0; i < kScan; ++i) {
    const double d = depth_after * i / kScan;
    if (band_index(d, follow.energy_after) == 0) {
      r.kind = Trapping::kQuantum;
      return r;
    }
  }
  return r;
}

AdiabaticityReport adiabaticity_check(const RampSchedule& schedule, const RecoilUnits& units,
                                      double travel_bound) {
  AdiabaticityReport r{};
  r.min_margin = std::numeric_limits<double>::infinity();
  const auto& pts = schedule.breakpoints();
  // omega = 2 sqrt(V), d omega / dt = V' / sqrt(V): margin 4 V^{3/2} / |V'|,
  // smallest at the shallow end of each linear segment.
  double worst_ratio = 0.0;  // max over segments of |dV| / (4 V^{3/2}) per unit duration
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double dt = pts[i].first - pts[i - 1].first;
    const double dv = pts[i].second - pts[i - 1].second;
    if (dv == 0.0) continue;
    const double v = std::min(pts[i].second, pts[i - 1].second);
    const double margin = v > 0.0 ? 4.0 * std::pow(v, 1.5) * dt / std::abs(dv) : 0.0;
    r.min_margin = std::min(r.min_margin, margin);
    worst_ratio = std::max(worst_ratio, v > 0.0 ? std::abs(dv) / (4.0 * std::pow(v, 1.5))
                                                : std::numeric_limits<double>::infinity());
  }
  r.adiabatic = r.min_margin >= kAdiabaticMargin;
  r.ramp_duration = units.time_to_si(schedule.end() - schedule.start());
  r.within_travel_bound = r.ramp_duration <= travel_bound * (1.0 + 1e-12);
  r.shortest_ramp = units.time_to_si(worst_ratio);
  return r;
}

std::optional<double> trap_lifetime(const ObservableSeries& s, double t_start) {
  std::size_t i = 0;
  while (i < s.size() && s.times[i] < t_start) ++i;
  if (i == s.size()) return std::nullopt;
  const double floor = s.norm_trapped[i] / std::exp(1.0);
  for (std::size_t k = i; k < s.size(); ++k) {
    if (s.norm_trapped[k] < floor) return s.times[k] - t_start;
  }
  return std::nullopt;
}

}  // namespace finlat
