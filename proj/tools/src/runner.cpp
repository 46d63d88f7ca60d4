#include "runner.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <thread>

#include "finlat/bloch.hpp"
#include "finlat/local_bands.hpp"
#include "finlat/parallel.hpp"
#include "finlat/revival.hpp"
#include "finlat/transmission.hpp"
#include "io.hpp"

#ifndef FINLAT_VERSION
#define FINLAT_VERSION "unknown"
#endif
#ifndef FINLAT_GIT_REVISION
#define FINLAT_GIT_REVISION "unknown"
#endif

namespace finlat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kUm = 1e-6;
constexpr double kMs = 1e-3;
constexpr double kNm = 1e-9;
constexpr int kReportedBands = 8;

class Log {
 public:
  explicit Log(std::ostream* out) : out_(out) {}
  void operator()(const std::string& line) {
    if (!out_) return;
    std::lock_guard lock(mutex_);
    *out_ << line << '\n';
  }

 private:
  std::ostream* out_;
  std::mutex mutex_;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Units {
  RecoilUnits u;
  double ms(double t) const { return u.time_to_si(t) / kMs; }
  double um(double z) const { return u.length_to_si(z) / kUm; }
  std::optional<double> ms(const std::optional<double>& t) const {
    return t ? std::optional<double>(ms(*t)) : std::nullopt;
  }
  std::optional<double> um(const std::optional<double>& z) const {
    return z ? std::optional<double>(um(*z)) : std::nullopt;
  }
};

json units_json(const LatticeGeometry& g, const RecoilUnits& u) {
  return {
      {"mass_kg", u.mass},
      {"E_R_J", u.E_R},
      {"E_R_over_h_Hz", u.E_R / (2.0 * constants::pi * constants::hbar)},
      {"t_R_s", u.t_R},
      {"x_R_m", u.x_R},
      {"p_R_kg_m_per_s", u.p_R},
      {"v_R_m_per_s", u.velocity()},
      {"k_L_per_m", g.k_L},
      {"period_m", g.period},
      {"w_z_m", g.w_z},
      {"w_z_recoil", g.waist_recoil()},
  };
}

json gates_json(const ConvergenceReport& r, const SpatialGrid& grid, const Units& units) {
  json gates = json::array();
  for (const auto& g : r.gates) {
    gates.push_back({{"name", g.name},
                     {"l2_change", g.l2_change},
                     {"global_phase_rad", g.global_phase},
                     {"tolerance", g.tolerance},
                     {"pass", g.pass}});
  }
  return {{"horizon_ms", units.ms(r.horizon)},
          {"grid_points", grid.n},
          {"dz_nm", units.u.length_to_si(grid.dz()) / kNm},
          {"norm_drift", r.norm_drift},
          {"gates", gates},
          {"pass", r.pass()}};
}

std::string_view trapping_name(Trapping t) {
  switch (t) {
    case Trapping::kQuantum:
      return "quantum";
    case Trapping::kClassical:
      return "classical";
    case Trapping::kUntrapped:
      break;
  }
  return "untrapped";
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return v;
}

// Abscissae where y crosses `level`, linearly interpolated.
std::vector<double> crossings(std::span<const double> x, std::span<const double> y, double level) {
  std::vector<double> out;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double a = y[i - 1] - level, b = y[i] - level;
    if ((a < 0.0) != (b < 0.0)) out.push_back(x[i - 1] + (x[i] - x[i - 1]) * a / (a - b));
  }
  return out;
}

ConvergenceReport check_gates(const RunConfig& c, const ExperimentConfig& e) {
  return convergence_gates(e, gate_horizon(c, e));
}

struct Outcome {
  json report;
  bool gates_pass = true;
};

// ---------------------------------------------------------------- bandmap

Outcome run_bandmap(const RunConfig& c, const fs::path& dir) {
  const auto g = make_geometry(c.physics);
  const Units units{make_units(c.physics)};
  const double depth = c.physics.V0_Er;
  Outcome out;
  auto& rep = out.report;
  rep["depth_Er"] = depth;

  const auto q = linspace(0.0, 1.0, 101);
  const auto bands = compute_bands(depth, q, kReportedBands);
  const auto edges = allowed_bands_planewave(depth, kReportedBands);
  json jb = json::array(), jg = json::array();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    jb.push_back({{"band", i + 1}, {"E_lo_Er", edges[i].lo}, {"E_hi_Er", edges[i].hi}});
    if (i > 0) {
      jg.push_back({{"below_band", i + 1},
                    {"E_lo_Er", edges[i - 1].hi},
                    {"E_hi_Er", edges[i].lo},
                    {"width_Er", edges[i].lo - edges[i - 1].hi}});
    }
  }
  rep["bands"] = jb;
  rep["gaps"] = jg;
  if (!c.output.csv) return out;

  std::vector<std::string> header{"q_kL"};
  for (int n = 1; n <= kReportedBands; ++n) header.push_back("E" + std::to_string(n) + "_Er");
  CsvWriter bc(dir / "bands.csv", header);
  std::vector<double> row(header.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    row[0] = q[i];
    for (int n = 0; n < kReportedBands; ++n) row[n + 1] = bands.energies[n][i];
    bc.row(row);
  }
  bc.close();

  const auto p = linspace(c.numerics.p_min_pr, c.numerics.p_max_pr, c.numerics.p_count);
  const auto map =
      build_band_map(g, depth, p, symmetric_grid(4.0 * g.waist_recoil(), c.numerics.map_points));
  CsvWriter mc(dir / "bandmap.csv", {"z_um", "p_pr", "E_Er", "re_k_kL", "im_k_kL"});
  const auto& zg = map.z_grid();
  for (std::size_t iz = 0; iz < zg.size(); ++iz) {
    for (std::size_t ip = 0; ip < p.size(); ++ip) {
      mc.row({units.um(zg[iz]), p[ip], p[ip] * p[ip], map.re_k(iz, ip), map.im_k(iz, ip)});
    }
  }
  mc.close();
  return out;
}

// ----------------------------------------------------------- transmission

Outcome run_transmission(const RunConfig& c, const fs::path& dir, Log& log, bool check_only) {
  const auto g = make_geometry(c.physics);
  const Units units{make_units(c.physics)};
  const double depth = c.physics.V0_Er;
  const auto p = linspace(c.numerics.p_min_pr, c.numerics.p_max_pr, c.numerics.p_count);
  Outcome out;
  auto& rep = out.report;

  if (c.numerics.tdse) {
    RunConfig mid = c;
    mid.physics.p_in_pr = p[p.size() / 2];
    mid.physics.V0_after_Er.reset();
    const auto e = make_experiment(mid);
    const auto gates = check_gates(mid, e);
    rep["gates"] = gates_json(gates, e.grid, units);
    out.gates_pass = gates.pass();
  }
  if (check_only) return out;

  const auto map = build_band_map(g, depth, {p.front()});
  const auto curve = transmission_curve(map, p, c.physics.sigma_p_pr, 0.004, c.numerics.kappa_min_kL);
  rep["depth_Er"] = depth;
  rep["sigma_p_pr"] = c.physics.sigma_p_pr;
  rep["analytic_window_edges_pr"] = crossings(p, curve.t_ave, 0.5);
  rep["truncated_points"] = curve.truncated_points;

  std::vector<double> t_tdse(p.size()), r_tdse(p.size()), rest(p.size());
  if (c.numerics.tdse) {
    const int workers = worker_count(c.numerics.workers, make_experiment(c).grid.n, p.size());
    parallel_for(p.size(), [&](std::size_t i) {
      RunConfig one = c;
      one.physics.p_in_pr = p[i];
      one.physics.V0_after_Er.reset();
      auto e = make_experiment(one);
      e.stop_when_lattice_below = c.numerics.tdse_stop_below;
      e.sample_interval = 4.0 / e.dt * e.dt;
      const auto r = run_experiment(e);
      t_tdse[i] = r.transmitted;
      r_tdse[i] = r.reflected;
      rest[i] = 1.0 - r.transmitted - r.reflected;
      char buf[96];
      std::snprintf(buf, sizeof buf, "tdse p_in=%.4f T=%.4f R=%.4f", p[i], t_tdse[i], r_tdse[i]);
      log(buf);
    }, static_cast<std::size_t>(workers));
    rep["tdse_window_edges_pr"] = crossings(p, t_tdse, 0.5);
    double dev = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dev += std::abs(t_tdse[i] - curve.t_ave[i]);
    rep["mean_abs_deviation"] = dev / static_cast<double>(p.size());
  }
  if (c.output.csv) {
    std::vector<std::string> header{"p_in_pr", "T_mono", "T_avg", "multi_gap"};
    if (c.numerics.tdse) {
      for (const char* h : {"T_tdse", "R_tdse", "in_lattice_tdse"}) header.push_back(h);
    }
    CsvWriter w(dir / "transmission.csv", header);
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::vector<double> row{p[i], curve.t_mono[i], curve.t_ave[i],
                              curve.multi_gap[i] ? 1.0 : 0.0};
      if (c.numerics.tdse) {
        row.push_back(t_tdse[i]);
        row.push_back(r_tdse[i]);
        row.push_back(rest[i]);
      }
      w.row(row);
    }
    w.close();
  }
  return out;
}

// ------------------------------------------------------------- propagate

void write_observables(const fs::path& path, const ObservableSeries& s, const Units& units) {
  CsvWriter w(path, {"t_ms", "V0_Er", "norm_cavity", "norm_trapped", "norm_T", "norm_R",
                     "mean_z_um", "mean_p_pr", "E_Er"});
  for (std::size_t i = 0; i < s.size(); ++i) {
    w.row({units.ms(s.times[i]), s.depth[i], s.norm_in_cavity[i], s.norm_trapped[i],
           s.norm_transmitted[i], s.norm_reflected[i], units.um(s.mean_position[i]),
           s.mean_momentum[i], s.energy[i]});
  }
  w.close();
}

void write_fidelity(const fs::path& path, const RevivalReport& r, const Units& units) {
  CsvWriter w(path, {"t_ms", "amplitude", "density", "density_mirrored", "signal", "envelope",
                     "trapped_mean_z_um"});
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const auto& f = r.trace[i];
    w.row({units.ms(f.time), f.amplitude, f.density, f.density_mirrored, f.signal(),
           r.envelope[i], units.um(r.trapped_mean_z[i])});
  }
  w.close();
}

void write_carpet(const fs::path& path, const DensityCarpet& carpet, const Units& units) {
  CsvWriter w(path, {"t_ms", "z_um", "density_per_um"});
  const std::size_t nz = carpet.z.size();
  const double per_um = units.u.length_from_si(kUm);
  for (std::size_t i = 0; i < carpet.times.size(); ++i) {
    for (std::size_t k = 0; k < nz; ++k) {
      w.row({units.ms(carpet.times[i]), units.um(carpet.z[k]),
             carpet.density[i * nz + k] * per_um});
    }
  }
  w.close();
}

Outcome run_propagation(const RunConfig& c, const fs::path& dir, Log& log, bool check_only) {
  ensure_directory(dir);
  const auto e = make_experiment(c);
  const auto g = e.geometry;
  const Units units{make_units(c.physics)};
  Outcome out;
  auto& rep = out.report;

  const auto gates = check_gates(c, e);
  rep["gates"] = gates_json(gates, e.grid, units);
  out.gates_pass = gates.pass();
  if (check_only) return out;

  const auto plan = plan_experiment(e);
  const double depth_before = plan.schedule.breakpoints().front().second;
  const double depth_after = plan.schedule.breakpoints().back().second;
  const auto trap = trapping_condition(e.packet.p_in, depth_before, depth_after);
  rep["trapping"] = {{"kind", trapping_name(trap.kind)},
                     {"band", trap.band},
                     {"energy_before_Er", trap.energy_before},
                     {"energy_after_Er", trap.energy_after}};
  if (plan.schedule.end() > plan.schedule.start()) {
    const auto a = adiabaticity_check(plan.schedule, units.u);
    rep["adiabaticity"] = {{"min_margin", a.min_margin},
                           {"adiabatic", a.adiabatic},
                           {"ramp_duration_ms", a.ramp_duration / kMs},
                           {"within_travel_bound", a.within_travel_bound},
                           {"shortest_ramp_ms", a.shortest_ramp / kMs}};
  }
  rep["ramp_midpoint_ms"] = optional_json(units.ms(plan.ramp_midpoint));

  ExperimentResult ex;
  std::optional<RevivalReport> revival;
  log("propagating to " + std::to_string(c.numerics.t_final_ms) + " ms on " +
      std::to_string(e.grid.n) + " points -> " + dir.string());
  if (plan.trap_window.width() > 0.0) {
    auto r = run_revival_experiment(e, plan, c.numerics.collapse_threshold,
                                    c.numerics.revival_threshold);
    ex = std::move(r.experiment);
    revival = std::move(r.report);
  } else {
    ex = run_experiment(e, plan);
  }

  const auto& s = ex.series;
  const double ramp_end = revival ? revival->reference_time : plan.schedule.end();
  rep["trap_lifetime_ms"] = optional_json(units.ms(trap_lifetime(s, ramp_end)));
  rep["final"] = {{"t_ms", units.ms(s.times.back())},
                  {"norm_cavity", s.norm_in_cavity.back()},
                  {"norm_trapped", s.norm_trapped.back()},
                  {"transmitted", ex.transmitted},
                  {"reflected", ex.reflected}};
  if (ex.cavity) {
    const auto& cav = *ex.cavity;
    rep["cavity"] = {{"energy_Er", cav.energy},
                     {"z_in_left_um", units.um(cav.z_in_left)},
                     {"z_in_right_um", units.um(cav.z_in_right)},
                     {"z_out_right_um", units.um(cav.z_out_right)},
                     {"length_um", units.um(cav.length)},
                     {"gap_strength", cav.gap_strength}};
    const auto box = box_revival_times(units.u.length_to_si(cav.length), units.u.mass);
    rep["box_well"] = {{"length_um", box.length / kUm},
                       {"mass_kg", box.mass},
                       {"T_rev_ms", box.t_rev / kMs},
                       {"T_spec_ms", box.t_spec / kMs},
                       {"T_sym_ms", box.t_sym / kMs}};
    const auto map = build_band_map(g, depth_after, {e.packet.p_in});
    const auto model = c.numerics.mass_model == "central" ? QuasimomentumModel::kCentral
                                                          : QuasimomentumModel::kEnergyConservation;
    try {
      const auto m = effective_mass_prediction(map, cav, cav.energy, c.numerics.v_min_vR, model);
      rep["mass_prediction"] = {{"mass_ratio", m.mass_ratio},
                                {"T_rev_ms", units.ms(m.t_rev)},
                                {"sensitivity", m.sensitivity},
                                {"excluded_fraction", m.excluded_fraction},
                                {"reliable", m.reliable},
                                {"band", m.band},
                                {"model", c.numerics.mass_model}};
    } catch (const DomainError& err) {
      rep["mass_prediction"] = {{"error", err.what()}};
    }
  }
  if (revival) {
    const auto& d = revival->detection;
    std::vector<double> times_ms;
    for (double t : d.revival_times) times_ms.push_back(units.ms(t));
    rep["revival"] = {{"reference_time_ms", units.ms(revival->reference_time)},
                      {"collapse_time_ms", optional_json(units.ms(d.collapse_time))},
                      {"revival_times_ms", times_ms},
                      {"revival_values", d.revival_values},
                      {"T_rev_ms", optional_json(units.ms(d.t_rev))},
                      {"quality", d.quality},
                      {"round_trip_ms", optional_json(units.ms(revival->round_trip))},
                      {"cavity_length_measured_um",
                       optional_json(units.um(revival->cavity_length_measured))},
                      {"collapse_threshold", c.numerics.collapse_threshold},
                      {"revival_threshold", c.numerics.revival_threshold}};
  }
  if (c.output.csv) {
    write_observables(dir / "observables.csv", s, units);
    if (revival) write_fidelity(dir / "fidelity.csv", *revival, units);
    if (ex.carpet) write_carpet(dir / "carpet.csv", *ex.carpet, units);
  }
  if (c.output.json) write_json(dir / "report.json", rep);
  return out;
}

// ---------------------------------------------------------- revival sweep

Outcome run_sweep(const RunConfig& c, const fs::path& dir, Log& log, bool check_only) {
  const auto& sweep = *c.sweep;
  const std::size_t n = sweep.values.size();
  std::vector<Outcome> runs(n);
  std::vector<std::string> names(n);
  std::size_t largest = 0;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "run_%02zu_%s_%g", i, sweep.parameter.c_str(), sweep.values[i]);
    names[i] = buf;
    auto sub = with_parameter(c, sweep.parameter, sweep.values[i]);
    sub.mode = Mode::kPropagate;
    largest = std::max(largest, make_experiment(sub).grid.n);
  }
  const int workers = worker_count(c.numerics.workers, largest, n);
  parallel_for(n, [&](std::size_t i) {
    auto sub = with_parameter(c, sweep.parameter, sweep.values[i]);
    sub.mode = Mode::kPropagate;
    runs[i] = run_propagation(sub, dir / names[i], log, check_only);
  }, static_cast<std::size_t>(workers));

  Outcome out;
  auto& rep = out.report;
  rep["parameter"] = sweep.parameter;
  rep["values"] = sweep.values;
  json jr = json::array();
  std::vector<double> xs, t_rev, xl, l_map, l_measured;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = runs[i].report;
    out.gates_pass = out.gates_pass && runs[i].gates_pass;
    json entry = {{"value", sweep.values[i]}, {"directory", names[i]},
                  {"gates_pass", runs[i].gates_pass}};
    if (r.contains("revival")) {
      entry["T_rev_ms"] = r["revival"]["T_rev_ms"];
      entry["cavity_length_measured_um"] = r["revival"]["cavity_length_measured_um"];
      if (r["revival"]["T_rev_ms"].is_number()) {
        xs.push_back(sweep.values[i]);
        t_rev.push_back(r["revival"]["T_rev_ms"].get<double>());
      }
    }
    if (r.contains("cavity")) {
      entry["cavity_length_um"] = r["cavity"]["length_um"];
      if (r.contains("revival") && r["revival"]["cavity_length_measured_um"].is_number()) {
        xl.push_back(sweep.values[i]);
        l_map.push_back(r["cavity"]["length_um"].get<double>());
        l_measured.push_back(r["revival"]["cavity_length_measured_um"].get<double>());
      }
    }
    if (r.contains("mass_prediction") && r["mass_prediction"].contains("T_rev_ms")) {
      entry["mass_prediction_T_rev_ms"] = r["mass_prediction"]["T_rev_ms"];
    }
    jr.push_back(entry);
  }
  rep["runs"] = jr;
  if (check_only) return out;

  if (xs.size() >= 4) {
    const auto f = scaling_fit(xs, t_rev);
    rep["scaling_fit"] = {{"exponent", f.exponent},
                          {"exponent_stderr", f.exponent_stderr},
                          {"prefactor", f.prefactor},
                          {"quadratic_prefactor", f.quadratic_prefactor},
                          {"quadratic_rms_residual", f.quadratic_rms_residual}};
  }
  if (xl.size() >= 2) {
    const auto lm = linear_fit(xl, l_measured);
    const auto lb = linear_fit(xl, l_map);
    rep["cavity_length_fit"] = {
        {"measured", {{"slope", lm.slope}, {"intercept", lm.intercept},
                      {"rms_relative_residual", lm.rms_relative_residual}}},
        {"band_map", {{"slope", lb.slope}, {"intercept", lb.intercept},
                      {"rms_relative_residual", lb.rms_relative_residual}}}};
  }
  auto monotone = [](const std::vector<double>& v, int sign) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (!(sign * (v[i] - v[i - 1]) > 0.0)) return false;
    }
    return v.size() >= 2;
  };
  rep["trend"] = {{"T_rev_increasing", monotone(t_rev, +1) && xs.size() == n},
                  {"cavity_length_decreasing", monotone(l_measured, -1) && xl.size() == n},
                  {"band_map_length_decreasing", monotone(l_map, -1) && xl.size() == n}};
  if (c.output.json) write_json(dir / "sweep.json", rep);
  return out;
}

// ------------------------------------------------------------- box oracle

Outcome run_box(const RunConfig& c, const fs::path& dir) {
  const Units units{make_units(c.physics)};
  const double length = c.physics.box_length_um * kUm;
  BoxOracleConfig bc;
  bc.length = units.u.length_from_si(length);
  bc.points = static_cast<std::size_t>(c.numerics.box_points);
  bc.samples = static_cast<std::size_t>(c.numerics.box_samples);
  const auto r = run_box_oracle(bc);
  const auto pred = box_revival_times(length, units.u.mass);

  Outcome out;
  auto& rep = out.report;
  rep["prediction"] = {{"length_um", c.physics.box_length_um},
                       {"T_rev_ms", pred.t_rev / kMs},
                       {"T_spec_ms", pred.t_spec / kMs},
                       {"T_sym_ms", pred.t_sym / kMs}};
  auto rel = [&](const std::optional<double>& t, double ref) {
    return t ? json(units.ms(*t) / (ref / kMs) - 1.0) : json(nullptr);
  };
  rep["measured"] = {{"T_rev_ms", optional_json(units.ms(r.t_rev_measured))},
                     {"T_rev_relative_error", rel(r.t_rev_measured, pred.t_rev)},
                     {"T_sym_ms", optional_json(units.ms(r.t_sym_measured))},
                     {"T_sym_relative_error", rel(r.t_sym_measured, pred.t_sym)},
                     {"specular_correlation", r.specular_correlation},
                     {"fidelity_at_rev", r.fidelity_at_rev},
                     {"fidelity_at_sym", r.fidelity_at_sym}};
  if (c.output.csv) {
    CsvWriter w(dir / "box_trace.csv", {"t_ms", "fidelity"});
    for (std::size_t i = 0; i < r.trace_times.size(); ++i) {
      w.row({units.ms(r.trace_times[i]), r.trace_fidelity[i]});
    }
    w.close();
  }
  return out;
}

std::vector<std::string> list_files(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir).generic_string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

LatticeGeometry make_geometry(const Physics& p) {
  double period = p.period_nm * kNm;
  if (p.wavelength_nm && p.angle_deg) {
    const double theta = *p.angle_deg * constants::pi / 180.0;
    period = *p.wavelength_nm * kNm / (2.0 * std::sin(0.5 * theta));
  }
  return lattice_from_period(period, p.w_z_um * kUm);
}

RecoilUnits make_units(const Physics& p) {
  return recoil_units(make_geometry(p), p.mass_amu * constants::atomic_mass_unit);
}

ExperimentConfig make_experiment(const RunConfig& c) {
  const auto& p = c.physics;
  const auto& n = c.numerics;
  const auto g = make_geometry(p);
  const auto u = make_units(p);
  ExperimentConfig e;
  e.geometry = g;
  const double z0 = p.z0_um ? u.length_from_si(*p.z0_um * kUm) : -3.0 * g.waist_recoil();
  e.packet = {z0, p.sigma_p_pr, p.p_in_pr};
  e.depth_before = p.V0_Er;
  e.depth_after = p.V0_after_Er.value_or(p.V0_Er);
  e.ramp_duration = u.time_from_si(p.t_ramp_ms * kMs);
  if (p.ramp_trigger == "fixed") {
    e.trigger = RampTrigger::kFixedTime;
    e.trigger_time = u.time_from_si(p.t_ramp_mid_ms.value_or(0.0) * kMs);
  } else if (p.ramp_trigger == "free_flight") {
    e.trigger = RampTrigger::kFreeFlight;
  } else if (p.ramp_trigger == "mean_crossing") {
    e.trigger = RampTrigger::kMeanCrossing;
  } else {
    e.trigger = RampTrigger::kPilotCrossing;
  }
  if (!c.schedule.empty()) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : c.schedule) pts.emplace_back(u.time_from_si(s.t_ms * kMs), s.V0_Er);
    e.schedule = RampSchedule(std::move(pts));
  }
  double dz_max = constants::pi / 12.0;
  if (n.dz_max_nm) {
    const double d = u.length_from_si(*n.dz_max_nm * kNm);
    if (d > constants::pi / 8.0 * (1.0 + 1e-12)) {
      throw ConfigError("numerics.dz_max_nm: exceeds P/8 = " +
                        std::to_string(g.period / 8.0 / kNm) + " nm");
    }
    dz_max = d;
  }
  e.grid = experiment_grid(g, e.packet, dz_max);
  e.dt = n.dt_tR;
  e.t_final = u.time_from_si(n.t_final_ms * kMs);
  e.sample_interval = u.time_from_si(n.sample_interval_ms * kMs);
  e.record_carpet = n.carpet;
  e.carpet_interval = u.time_from_si(n.carpet_interval_ms * kMs);
  return e;
}

double gate_horizon(const RunConfig& c, const ExperimentConfig& e) {
  const auto& h = c.numerics.check_horizon_ms;
  const double arrival = std::abs(e.packet.z0) / (2.0 * e.packet.p_in);
  const double t = h ? make_units(c.physics).time_from_si(*h * kMs) : 1.5 * arrival;
  return std::min(e.t_final, t);
}

int worker_count(int requested, std::size_t grid_points, std::size_t jobs) {
  const int cores = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int w = requested > 0 ? requested : cores;
  // State, FFT buffers, potential tables and the fidelity reference.
  const double per_run = static_cast<double>(grid_points) * 16.0 * 12.0;
  const long pages = sysconf(_SC_AVPHYS_PAGES);
  const long page = sysconf(_SC_PAGESIZE);
  if (pages > 0 && page > 0) {
    const double budget = 0.5 * static_cast<double>(pages) * static_cast<double>(page);
    w = std::min<double>(w, std::max(1.0, std::floor(budget / per_run)));
  }
  return std::max(1, std::min<int>(w, static_cast<int>(std::max<std::size_t>(jobs, 1))));
}

int run(const RunConfig& config, const RunOptions& options) {
  const fs::path dir = config.output.directory;
  ensure_directory(dir);
  Log log(options.log);
  Outcome out;
  switch (config.mode) {
    case Mode::kBandmap:
      if (!options.check_only) out = run_bandmap(config, dir);
      break;
    case Mode::kTransmission:
      out = run_transmission(config, dir, log, options.check_only);
      break;
    case Mode::kPropagate:
      out = run_propagation(config, dir, log, options.check_only);
      break;
    case Mode::kRevivalSweep:
      out = run_sweep(config, dir, log, options.check_only);
      break;
    case Mode::kBoxOracle:
      if (!options.check_only) out = run_box(config, dir);
      break;
  }
  if (config.output.json && !options.check_only && config.mode != Mode::kPropagate &&
      config.mode != Mode::kRevivalSweep) {
    write_json(dir / "report.json", out.report);
  }
  if (options.check_only) write_json(dir / "check.json", out.report);

  const auto g = make_geometry(config.physics);
  json manifest = {
      {"tool", "finlat"},
      {"version", FINLAT_VERSION},
      {"git_revision", FINLAT_GIT_REVISION},
      {"mode", std::string(to_string(config.mode))},
      {"check_only", options.check_only},
      {"config", to_json(config)},
      {"units", units_json(g, make_units(config.physics))},
      {"gates_pass", out.gates_pass},
  };
  if (out.report.contains("gates")) manifest["gates"] = out.report["gates"];
  manifest["files"] = list_files(dir);
  write_json(dir / "manifest.json", manifest);

  const bool gate_failure = !out.gates_pass && (options.check_only || config.numerics.enforce_gates);
  return gate_failure ? kExitNumerical : kExitOk;
}

int run_guarded(const RunConfig& config, const RunOptions& options, std::ostream& err) {
  try {
    return run(config, options);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "invalid setup: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace finlat::cli
