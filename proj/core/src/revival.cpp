#include "finlat/revival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace finlat {

using constants::pi;

BoxWellPrediction box_revival_times(double length, double mass) {
  if (!(length > 0.0) || !(mass > 0.0)) throw DomainError("box length and mass must be positive");
  const double t_rev = 4.0 * mass * length * length / (pi * constants::hbar);
  return {length, mass, t_rev, t_rev / 2.0, t_rev / 8.0};
}

namespace {

void require_same_grid(const WavePacketState& a, const WavePacketState& b) {
  if (!(a.grid == b.grid) || a.psi.size() != b.psi.size()) {
    throw DomainError("states live on different grids");
  }
}

}  // namespace

double amplitude_fidelity(const WavePacketState& reference, const WavePacketState& state) {
  require_same_grid(reference, state);
  cplx overlap{};
  double nr = 0.0, ns = 0.0;
  for (std::size_t i = 0; i < state.psi.size(); ++i) {
    overlap += std::conj(reference.psi[i]) * state.psi[i];
    nr += std::norm(reference.psi[i]);
    ns += std::norm(state.psi[i]);
  }
  if (nr == 0.0 || ns == 0.0) return 0.0;
  return std::clamp(std::norm(overlap) / (nr * ns), 0.0, 1.0);
}

DensityProfile::DensityProfile(const SpatialGrid& grid, Interval window, double bin)
    : grid_(grid), bin_(bin) {
  if (!(bin > 0.0) || !(window.width() >= bin)) {
    throw DomainError("density window must hold at least one bin");
  }
  count_ = static_cast<std::size_t>(std::floor(window.width() / bin));
  lo_ = 0.5 * (window.lo + window.hi) - 0.5 * static_cast<double>(count_) * bin;
}

std::vector<double> DensityProfile::operator()(const WavePacketState& state) const {
  if (!(state.grid == grid_)) throw DomainError("state does not match the profile grid");
  std::vector<double> d(count_, 0.0);
  for (std::size_t i = 0; i < state.psi.size(); ++i) {
    const double b = (grid_.z(i) - lo_) / bin_;
    if (b < 0.0) continue;
    const auto k = static_cast<std::size_t>(b);
    if (k < count_) d[k] += std::norm(state.psi[i]);
  }
  return d;
}

double density_correlation(std::span<const double> reference, std::span<const double> density,
                           bool mirrored) {
  if (reference.size() != density.size() || reference.empty()) {
    throw DomainError("density profiles differ in size");
  }
  const std::size_t n = reference.size();
  auto ref = [&](std::size_t i) { return mirrored ? reference[n - 1 - i] : reference[i]; };
  const double mr = std::accumulate(reference.begin(), reference.end(), 0.0) / static_cast<double>(n);
  const double md = std::accumulate(density.begin(), density.end(), 0.0) / static_cast<double>(n);
  double cross = 0.0, rr = 0.0, dd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = ref(i) - mr, b = density[i] - md;
    cross += a * b;
    rr += a * a;
    dd += b * b;
  }
  const double scale = std::max(rr, dd);
  if (scale == 0.0) return 0.0;
  return std::clamp(cross / scale, 0.0, 1.0);
}

std::vector<double> round_trip_envelope(std::span<const double> times,
                                        std::span<const double> values, double period) {
  if (times.size() != values.size()) throw DomainError("trace times and values differ in size");
  std::vector<double> env(values.size());
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    while (times[lo] < times[i] - 0.5 * period) ++lo;
    while (hi < values.size() && times[hi] <= times[i] + 0.5 * period) ++hi;
    env[i] = *std::max_element(values.begin() + static_cast<std::ptrdiff_t>(lo),
                               values.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return env;
}

FidelityTracker::FidelityTracker(WavePacketState reference, Interval window, double bin)
    : reference_(std::move(reference)), profile_(reference_.grid, window, bin) {
  ref_density_ = profile_(reference_);
}

FidelitySample FidelityTracker::sample(const WavePacketState& state) const {
  const auto d = profile_(state);
  return {state.time, amplitude_fidelity(reference_, state),
          density_correlation(ref_density_, d, false), density_correlation(ref_density_, d, true)};
}

std::vector<FidelitySample> fidelity_trace(const WavePacketState& reference,
                                           std::span<const WavePacketState> states,
                                           Interval window, double bin) {
  FidelityTracker tracker(reference, window, bin);
  for (const auto& s : states) {
    require_same_grid(reference, s);
    tracker.add(s);
  }
  return tracker.trace();
}

RevivalDetection detect_revivals(std::span<const double> times, std::span<const double> values,
                                 double collapse_threshold, double revival_threshold,
                                 double min_separation) {
  if (times.size() != values.size()) throw DomainError("trace times and values differ in size");
  RevivalDetection out;
  const std::size_t n = values.size();
  std::size_t start = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i] < collapse_threshold) {
      out.collapse_time = times[i];
      start = i;
      break;
    }
  }
  if (!out.collapse_time) return out;

  std::vector<std::size_t> peaks;
  for (std::size_t i = start + 1; i + 1 < n; ++i) {
    if (values[i] >= revival_threshold && values[i] >= values[i - 1] && values[i] > values[i + 1]) {
      peaks.push_back(i);
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t p : peaks) {
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return std::abs(times[k] - times[p]) < min_separation;
    });
    if (clear) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end());
  for (std::size_t k : kept) {
    out.revival_times.push_back(times[k]);
    out.revival_values.push_back(values[k]);
  }
  if (!kept.empty()) {
    out.t_rev = out.revival_times.front();
    out.quality = out.revival_values.front();
  }
  return out;
}

std::optional<double> oscillation_period(std::span<const double> times,
                                         std::span<const double> mean_z) {
  std::vector<double> crossings;
  for (std::size_t i = 1; i < mean_z.size(); ++i) {
    if (mean_z[i - 1] < 0.0 && mean_z[i] >= 0.0) {
      const double f = -mean_z[i - 1] / (mean_z[i] - mean_z[i - 1]);
      crossings.push_back(times[i - 1] + f * (times[i] - times[i - 1]));
    }
  }
  if (crossings.size() < 2) return std::nullopt;
  std::vector<double> gaps;
  for (std::size_t i = 1; i < crossings.size(); ++i) gaps.push_back(crossings[i] - crossings[i - 1]);
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  return gaps[gaps.size() / 2];
}

std::optional<double> turning_point_length(std::span<const double> times,
                                           std::span<const double> mean_z, double t_start,
                                           double duration) {
  std::optional<double> hi, lo;
  for (std::size_t i = 1; i + 1 < mean_z.size(); ++i) {
    if (times[i] < t_start || times[i] > t_start + duration) continue;
    if (mean_z[i] >= mean_z[i - 1] && mean_z[i] > mean_z[i + 1]) {
      hi = hi ? std::max(*hi, mean_z[i]) : mean_z[i];
    }
    if (mean_z[i] <= mean_z[i - 1] && mean_z[i] < mean_z[i + 1]) {
      lo = lo ? std::min(*lo, mean_z[i]) : mean_z[i];
    }
  }
  if (!hi || !lo) return std::nullopt;
  return *hi - *lo;
}

PowerLawFit scaling_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 4) throw DomainError("scaling fit needs at least 4 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("scaling fit needs positive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw DomainError("scaling fit needs distinct x values");
  PowerLawFit fit{};
  fit.exponent = sxy / sxx;
  fit.prefactor = std::exp(my - fit.exponent * mx);
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (my + fit.exponent * (lx[i] - mx));
    ssr += r * r;
  }
  fit.exponent_stderr = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);

  double mean_log_a = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_log_a += ly[i] - 2.0 * lx[i];
  fit.quadratic_prefactor = std::exp(mean_log_a / static_cast<double>(n));
  double rr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] / (fit.quadratic_prefactor * x[i] * x[i]) - 1.0;
    rr += r * r;
  }
  fit.quadratic_rms_residual = std::sqrt(rr / static_cast<double>(n));
  return fit;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("linear fit needs at least 2 points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("linear fit needs distinct x values");
  LinearFit fit{};
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - (fit.intercept + fit.slope * x[i])) / y[i];
    rr += r * r;
  }
  fit.rms_relative_residual = std::sqrt(rr / n);
  return fit;
}

namespace {

// Quasimomentum in [0, 1] where band `band` reaches `energy`, if it does.
std::optional<double> invert_band(double depth, int band, double energy) {
  const double e0 = band_energy(depth, band, 0.0);
  const double e1 = band_energy(depth, band, 1.0);
  if (energy < std::min(e0, e1) || energy > std::max(e0, e1)) return std::nullopt;
  const bool rising = e1 > e0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((band_energy(depth, band, mid) < energy) == rising) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct MassIntegrand {
  std::vector<double> mass, speed;  // per interior sample, NaN where unusable
};

MassIntegrand sample_interior(const LocalBandMap& map, const CavityGeometry& cavity, double energy,
                              int band, QuasimomentumModel model, int points) {
  MassIntegrand s;
  const double q_centre = invert_band(map.depth_at(0.0), band, energy).value_or(0.5);
  for (int i = 0; i < points; ++i) {
    const double z = cavity.z_in_right * (i + 0.5) / points;
    const double depth = map.depth_at(z);
    std::optional<double> q = model == QuasimomentumModel::kCentral
                                  ? std::optional<double>(q_centre)
                                  : invert_band(depth, band, energy);
    double m = std::nan(""), v = std::nan("");
    if (q) {
      v = std::abs(group_velocity(depth, band, *q));
      try {
        m = effective_mass(depth, band, *q);
      } catch (const DivergentMass&) {
        m = std::nan("");
      }
    }
    s.mass.push_back(m);
    s.speed.push_back(v);
  }
  return s;
}

double weighted_mass(const MassIntegrand& s, double v_min, double& excluded) {
  double num = 0.0, den = 0.0;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < s.mass.size(); ++i) {
    if (!(s.speed[i] >= v_min) || std::isnan(s.mass[i])) {
      ++dropped;
      continue;
    }
    num += s.mass[i] / s.speed[i];
    den += 1.0 / s.speed[i];
  }
  excluded = static_cast<double>(dropped) / static_cast<double>(s.mass.size());
  return den > 0.0 ? num / den : std::nan("");
}

}  // namespace

MassPrediction effective_mass_prediction(const LocalBandMap& map, const CavityGeometry& cavity,
                                         double energy, double v_min, QuasimomentumModel model) {
  if (!(v_min > 0.0)) throw DomainError("v_min must be positive");
  const int band = band_index(map.depth_at(0.0), energy);
  if (band == 0) throw DomainError("energy lies in a gap at the cavity centre");
  constexpr int kPoints = 400;
  const auto s = sample_interior(map, cavity, energy, band, model, kPoints);
  MassPrediction out{};
  out.band = band;
  double excluded_double = 0.0;
  out.mass_ratio = weighted_mass(s, v_min, out.excluded_fraction);
  const double doubled = weighted_mass(s, 2.0 * v_min, excluded_double);
  out.sensitivity = std::abs(doubled / out.mass_ratio - 1.0);
  // m = 1/2 and hbar = 1 in recoil units
  out.t_rev = 2.0 * out.mass_ratio * cavity.length * cavity.length / pi;
  out.reliable = std::isfinite(out.mass_ratio) && out.excluded_fraction <= 0.1 &&
                 out.sensitivity < 0.2;
  return out;
}

RevivalRun run_revival_experiment(const ExperimentConfig& config, double collapse_threshold,
                                  double revival_threshold, double bin) {
  return run_revival_experiment(config, plan_experiment(config), collapse_threshold,
                                revival_threshold, bin);
}

RevivalRun run_revival_experiment(const ExperimentConfig& config, const ExperimentPlan& plan,
                                  double collapse_threshold, double revival_threshold,
                                  double bin) {
  if (plan.trap_window.width() <= 0.0) throw DomainError("no cavity forms for this configuration");
  RevivalRun run;
  auto& rep = run.report;
  std::optional<FidelityTracker> tracker;
  run.experiment = run_experiment(config, plan, [&](const WavePacketState& s, const SampleInfo& info) {
    if (!info.ramp_complete) return;
    if (!tracker) {
      tracker.emplace(s, plan.trap_window, bin);
      rep.reference_time = s.time;
    }
    tracker->add(s);
    rep.trapped_mean_z.push_back(s.mean_position_between(plan.trap_window.lo, plan.trap_window.hi));
  });
  if (!tracker) return run;
  rep.trace = tracker->trace();
  std::vector<double> times, signal;
  for (const auto& f : rep.trace) {
    times.push_back(f.time);
    signal.push_back(f.signal());
  }
  rep.round_trip = oscillation_period(times, rep.trapped_mean_z);
  if (!rep.round_trip) {
    rep.envelope = signal;
  } else {
    rep.cavity_length_measured =
        turning_point_length(times, rep.trapped_mean_z, rep.reference_time, 3.0 * *rep.round_trip);
    rep.envelope = round_trip_envelope(times, signal, *rep.round_trip);
  }
  rep.detection = detect_revivals(times, rep.envelope, collapse_threshold, revival_threshold,
                                  rep.round_trip.value_or(0.0));
  return run;
}

namespace {

WavePacketState evolve_free(const WavePacketState& initial, double t) {
  auto s = initial;
  if (t <= 0.0) return s;
  SplitOperator op(initial.grid, {}, t);
  op.step(s, 0.0);
  return s;
}

// Golden-section maximisation of f on [a, b].
template <class F>
double maximise(F f, double a, double b, double tol) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

struct BoxRun {
  std::vector<double> times, values;
  RevivalDetection detection;
  std::optional<double> refined;
};

BoxRun first_full_revival(const WavePacketState& initial, double t_span, std::size_t samples) {
  SplitOperator op(initial.grid, {}, t_span / static_cast<double>(samples));
  auto s = initial;
  std::vector<double> times{0.0}, values{1.0};
  for (std::size_t i = 0; i < samples; ++i) {
    op.step(s, 0.0);
    times.push_back(s.time);
    values.push_back(amplitude_fidelity(initial, s));
  }
  BoxRun run;
  run.times = times;
  run.values = values;
  // A full revival restores the amplitude itself; fractional revivals stay far below 0.9.
  run.detection = detect_revivals(times, values, kCollapseThreshold, 0.9, 0.0);
  if (run.detection.t_rev) {
    const double h = t_span / static_cast<double>(samples);
    run.refined = maximise(
        [&](double t) { return amplitude_fidelity(initial, evolve_free(initial, t)); },
        *run.detection.t_rev - h, *run.detection.t_rev + h, 1e-9 * t_span);
  }
  return run;
}

}  // namespace

BoxOracleResult run_box_oracle(const BoxOracleConfig& c) {
  if (!(c.length > 0.0) || c.samples < 100) throw DomainError("bad box oracle configuration");
  const auto grid = SpatialGrid::hard_wall(0.0, c.length, c.points);
  const double sigma_p = 1.0 / (std::sqrt(2.0) * c.packet_width * c.length);

  BoxOracleResult out{};
  out.t_rev_predicted = 2.0 * c.length * c.length / pi;

  const auto moving = initial_gaussian({c.start * c.length, sigma_p, c.momentum}, grid);
  const auto full = first_full_revival(moving, 1.25 * out.t_rev_predicted, c.samples);
  out.detection = full.detection;
  out.trace_times = full.times;
  out.trace_fidelity = full.values;
  out.t_rev_measured = full.refined;
  out.fidelity_at_rev =
      full.refined ? amplitude_fidelity(moving, evolve_free(moving, *full.refined)) : 0.0;

  const DensityProfile profile(grid, {0.0, c.length}, c.length / 256.0);
  const auto half = evolve_free(moving, 0.5 * out.t_rev_predicted);
  out.specular_correlation = density_correlation(profile(moving), profile(half), true);

  const auto symmetric = initial_gaussian({0.5 * c.length, sigma_p, 0.0}, grid);
  const auto sym = first_full_revival(symmetric, 0.25 * out.t_rev_predicted, c.samples);
  out.t_sym_measured = sym.refined;
  out.fidelity_at_sym =
      sym.refined ? amplitude_fidelity(symmetric, evolve_free(symmetric, *sym.refined)) : 0.0;
  return out;
}

}  // namespace finlat
