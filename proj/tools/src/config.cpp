#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace finlat::cli {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Mode, std::string_view>, 5> kModes = {{
    {Mode::kBandmap, "bandmap"},
    {Mode::kTransmission, "transmission"},
    {Mode::kPropagate, "propagate"},
    {Mode::kRevivalSweep, "revival_sweep"},
    {Mode::kBoxOracle, "box_oracle"},
}};

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

// Reads the keys of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  void number(std::string_view key, double& out, std::string_view unit) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(join(path_, key) + ": expected a number" + in(unit));
      out = v->get<double>();
    }
  }
  void number(std::string_view key, std::optional<double>& out, std::string_view unit) {
    double v = 0.0;
    if (has(key)) {
      number(key, v, unit);
      out = v;
    }
  }
  void integer(std::string_view key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) throw ConfigError(join(path_, key) + ": expected an integer");
      out = v->get<int>();
    }
  }
  void boolean(std::string_view key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(join(path_, key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void text(std::string_view key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(join(path_, key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  const json* raw(std::string_view key) { return take(key); }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.contains(key)) throw ConfigError(join(path_, key) + ": unknown key");
    }
  }

 private:
  bool has(std::string_view key) const { return doc_.contains(std::string(key)); }
  const json* take(std::string_view key) {
    const auto it = doc_.find(std::string(key));
    if (it == doc_.end()) return nullptr;
    seen_.insert(std::string(key));
    return &*it;
  }
  std::string where() const { return path_.empty() ? "config" : path_; }
  static std::string in(std::string_view unit) {
    return unit.empty() ? std::string() : " in " + std::string(unit);
  }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void positive(const std::string& path, double v, std::string_view unit) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(path + ": must be positive (" + std::string(unit) + ")");
  }
}

void non_negative(const std::string& path, double v, std::string_view unit) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError(path + ": must be non-negative (" + std::string(unit) + ")");
  }
}

void validate(const RunConfig& c) {
  const auto& p = c.physics;
  positive("physics.period_nm", p.period_nm, "nm");
  if (p.wavelength_nm.has_value() != p.angle_deg.has_value()) {
    throw ConfigError("physics.wavelength_nm: give both wavelength_nm and angle_deg, or neither");
  }
  if (p.wavelength_nm) {
    positive("physics.wavelength_nm", *p.wavelength_nm, "nm");
    if (!(*p.angle_deg > 0.0 && *p.angle_deg <= 180.0)) {
      throw ConfigError("physics.angle_deg: must lie in (0, 180] (deg)");
    }
  }
  positive("physics.w_z_um", p.w_z_um, "um");
  positive("physics.mass_amu", p.mass_amu, "amu");
  non_negative("physics.V0_Er", p.V0_Er, "E_R");
  if (p.V0_after_Er) non_negative("physics.V0_after_Er", *p.V0_after_Er, "E_R");
  non_negative("physics.t_ramp_ms", p.t_ramp_ms, "ms");
  static const std::set<std::string> triggers{"pilot", "free_flight", "fixed", "mean_crossing"};
  if (!triggers.contains(p.ramp_trigger)) {
    throw ConfigError("physics.ramp_trigger: expected pilot, free_flight, fixed or mean_crossing");
  }
  if (p.ramp_trigger == "fixed" && !p.t_ramp_mid_ms) {
    throw ConfigError("physics.t_ramp_mid_ms: required by the fixed trigger (ms)");
  }
  positive("physics.p_in_pr", p.p_in_pr, "p_R");
  positive("physics.sigma_p_pr", p.sigma_p_pr, "p_R");
  if (p.z0_um && !(*p.z0_um < 0.0)) {
    throw ConfigError("physics.z0_um: the packet starts left of the lattice, z0 < 0 (um)");
  }
  positive("physics.box_length_um", p.box_length_um, "um");

  const auto& n = c.numerics;
  positive("numerics.dt_tR", n.dt_tR, "hbar/E_R");
  if (n.dz_max_nm) positive("numerics.dz_max_nm", *n.dz_max_nm, "nm");
  positive("numerics.t_final_ms", n.t_final_ms, "ms");
  positive("numerics.sample_interval_ms", n.sample_interval_ms, "ms");
  if (!(n.collapse_threshold > 0.0 && n.collapse_threshold < n.revival_threshold &&
        n.revival_threshold <= 1.0)) {
    throw ConfigError(
        "numerics.collapse_threshold: need 0 < collapse_threshold < revival_threshold <= 1");
  }
  positive("numerics.v_min_vR", n.v_min_vR, "p_R/m");
  if (n.mass_model != "energy" && n.mass_model != "central") {
    throw ConfigError("numerics.mass_model: expected energy or central");
  }
  positive("numerics.kappa_min_kL", n.kappa_min_kL, "k_L");
  if (n.map_points < 16) throw ConfigError("numerics.map_points: need at least 16");
  positive("numerics.p_min_pr", n.p_min_pr, "p_R");
  if (!(n.p_max_pr >= n.p_min_pr)) throw ConfigError("numerics.p_max_pr: must be >= p_min_pr (p_R)");
  if (n.p_count < 1) throw ConfigError("numerics.p_count: need at least 1");
  positive("numerics.tdse_stop_below", n.tdse_stop_below, "probability");
  positive("numerics.carpet_interval_ms", n.carpet_interval_ms, "ms");
  if (n.check_horizon_ms) positive("numerics.check_horizon_ms", *n.check_horizon_ms, "ms");
  if (n.box_points < 15) throw ConfigError("numerics.box_points: need at least 15");
  if (n.box_samples < 100) throw ConfigError("numerics.box_samples: need at least 100");
  if (n.workers < 0) throw ConfigError("numerics.workers: must be >= 0");

  for (std::size_t i = 0; i < c.schedule.size(); ++i) {
    const std::string path = "schedule[" + std::to_string(i) + "]";
    non_negative(path + ".V0_Er", c.schedule[i].V0_Er, "E_R");
    if (i > 0 && !(c.schedule[i].t_ms > c.schedule[i - 1].t_ms)) {
      throw ConfigError(path + ".t_ms: times must increase (ms)");
    }
  }

  if (c.mode == Mode::kRevivalSweep && !c.sweep) {
    throw ConfigError("sweep: revival_sweep needs a sweep block");
  }
  if (c.sweep) {
    if (c.mode != Mode::kRevivalSweep) throw ConfigError("sweep: only valid in revival_sweep mode");
    if (std::find(kSweepParameters.begin(), kSweepParameters.end(), c.sweep->parameter) ==
        kSweepParameters.end()) {
      throw ConfigError("sweep.parameter: '" + c.sweep->parameter + "' is not a sweepable key");
    }
    if (c.sweep->values.empty()) throw ConfigError("sweep.values: need at least one value");
    for (std::size_t i = 0; i < c.sweep->values.size(); ++i) {
      RunConfig probe = with_parameter(c, c.sweep->parameter, c.sweep->values[i]);
      probe.mode = Mode::kPropagate;
      try {
        validate(probe);
      } catch (const ConfigError& e) {
        throw ConfigError("sweep.values[" + std::to_string(i) + "]: " + e.what());
      }
    }
  }
  if (c.output.directory.empty()) throw ConfigError("output.directory: must not be empty");
}

}  // namespace

std::string_view to_string(Mode mode) {
  for (const auto& [m, name] : kModes) {
    if (m == mode) return name;
  }
  return "unknown";
}

std::optional<Mode> mode_from_string(std::string_view name) {
  for (const auto& [m, n] : kModes) {
    if (n == name) return m;
  }
  return std::nullopt;
}

RunConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

RunConfig parse_config(const json& doc) {
  RunConfig c;
  Section top(doc, "");
  std::string mode = std::string(to_string(c.mode));
  top.text("mode", mode);
  const auto m = mode_from_string(mode);
  if (!m) throw ConfigError("mode: unknown mode '" + mode + "'");
  c.mode = *m;

  if (const json* v = top.raw("physics")) {
    Section s(*v, "physics");
    auto& p = c.physics;
    s.number("period_nm", p.period_nm, "nm");
    s.number("wavelength_nm", p.wavelength_nm, "nm");
    s.number("angle_deg", p.angle_deg, "deg");
    s.number("w_z_um", p.w_z_um, "um");
    s.number("mass_amu", p.mass_amu, "amu");
    s.number("V0_Er", p.V0_Er, "E_R");
    s.number("V0_after_Er", p.V0_after_Er, "E_R");
    s.number("t_ramp_ms", p.t_ramp_ms, "ms");
    s.text("ramp_trigger", p.ramp_trigger);
    s.number("t_ramp_mid_ms", p.t_ramp_mid_ms, "ms");
    s.number("p_in_pr", p.p_in_pr, "p_R");
    s.number("sigma_p_pr", p.sigma_p_pr, "p_R");
    s.number("z0_um", p.z0_um, "um");
    s.number("box_length_um", p.box_length_um, "um");
    s.finish();
  }
  if (const json* v = top.raw("numerics")) {
    Section s(*v, "numerics");
    auto& n = c.numerics;
    s.number("dt_tR", n.dt_tR, "hbar/E_R");
    s.number("dz_max_nm", n.dz_max_nm, "nm");
    s.number("t_final_ms", n.t_final_ms, "ms");
    s.number("sample_interval_ms", n.sample_interval_ms, "ms");
    s.number("collapse_threshold", n.collapse_threshold, "");
    s.number("revival_threshold", n.revival_threshold, "");
    s.number("v_min_vR", n.v_min_vR, "p_R/m");
    s.text("mass_model", n.mass_model);
    s.number("kappa_min_kL", n.kappa_min_kL, "k_L");
    s.integer("map_points", n.map_points);
    s.number("p_min_pr", n.p_min_pr, "p_R");
    s.number("p_max_pr", n.p_max_pr, "p_R");
    s.integer("p_count", n.p_count);
    s.boolean("tdse", n.tdse);
    s.number("tdse_stop_below", n.tdse_stop_below, "");
    s.boolean("carpet", n.carpet);
    s.number("carpet_interval_ms", n.carpet_interval_ms, "ms");
    s.number("check_horizon_ms", n.check_horizon_ms, "ms");
    s.boolean("enforce_gates", n.enforce_gates);
    s.integer("box_points", n.box_points);
    s.integer("box_samples", n.box_samples);
    s.integer("workers", n.workers);
    s.finish();
  }
  if (const json* v = top.raw("schedule")) {
    if (!v->is_array()) throw ConfigError("schedule: expected an array of {t_ms, V0_Er}");
    for (std::size_t i = 0; i < v->size(); ++i) {
      Section s((*v)[i], "schedule[" + std::to_string(i) + "]");
      std::optional<double> t, d;
      s.number("t_ms", t, "ms");
      s.number("V0_Er", d, "E_R");
      s.finish();
      if (!t || !d) {
        throw ConfigError("schedule[" + std::to_string(i) + "]: needs both t_ms and V0_Er");
      }
      c.schedule.push_back({*t, *d});
    }
  }
  if (const json* v = top.raw("sweep")) {
    Section s(*v, "sweep");
    Sweep sw;
    s.text("parameter", sw.parameter);
    if (const json* vals = s.raw("values")) {
      if (!vals->is_array()) throw ConfigError("sweep.values: expected an array of numbers");
      for (std::size_t i = 0; i < vals->size(); ++i) {
        if (!(*vals)[i].is_number()) {
          throw ConfigError("sweep.values[" + std::to_string(i) + "]: expected a number");
        }
        sw.values.push_back((*vals)[i].get<double>());
      }
    }
    s.finish();
    c.sweep = sw;
  }
  if (const json* v = top.raw("output")) {
    Section s(*v, "output");
    s.text("directory", c.output.directory);
    s.boolean("csv", c.output.csv);
    s.boolean("json", c.output.json);
    s.finish();
  }
  top.finish();
  validate(c);
  return c;
}

json to_json(const RunConfig& c) {
  const auto& p = c.physics;
  const auto& n = c.numerics;
  json phys = {
      {"period_nm", p.period_nm},     {"w_z_um", p.w_z_um},
      {"mass_amu", p.mass_amu},       {"V0_Er", p.V0_Er},
      {"t_ramp_ms", p.t_ramp_ms},     {"ramp_trigger", p.ramp_trigger},
      {"p_in_pr", p.p_in_pr},         {"sigma_p_pr", p.sigma_p_pr},
      {"box_length_um", p.box_length_um},
  };
  if (p.wavelength_nm) phys["wavelength_nm"] = *p.wavelength_nm;
  if (p.angle_deg) phys["angle_deg"] = *p.angle_deg;
  if (p.V0_after_Er) phys["V0_after_Er"] = *p.V0_after_Er;
  if (p.t_ramp_mid_ms) phys["t_ramp_mid_ms"] = *p.t_ramp_mid_ms;
  if (p.z0_um) phys["z0_um"] = *p.z0_um;
  json num = {
      {"dt_tR", n.dt_tR},
      {"t_final_ms", n.t_final_ms},
      {"sample_interval_ms", n.sample_interval_ms},
      {"collapse_threshold", n.collapse_threshold},
      {"revival_threshold", n.revival_threshold},
      {"v_min_vR", n.v_min_vR},
      {"mass_model", n.mass_model},
      {"kappa_min_kL", n.kappa_min_kL},
      {"map_points", n.map_points},
      {"p_min_pr", n.p_min_pr},
      {"p_max_pr", n.p_max_pr},
      {"p_count", n.p_count},
      {"tdse", n.tdse},
      {"tdse_stop_below", n.tdse_stop_below},
      {"carpet", n.carpet},
      {"carpet_interval_ms", n.carpet_interval_ms},
      {"enforce_gates", n.enforce_gates},
      {"box_points", n.box_points},
      {"box_samples", n.box_samples},
      {"workers", n.workers},
  };
  if (n.dz_max_nm) num["dz_max_nm"] = *n.dz_max_nm;
  if (n.check_horizon_ms) num["check_horizon_ms"] = *n.check_horizon_ms;
  json doc = {
      {"mode", std::string(to_string(c.mode))},
      {"physics", phys},
      {"numerics", num},
      {"output",
       {{"directory", c.output.directory}, {"csv", c.output.csv}, {"json", c.output.json}}},
  };
  if (!c.schedule.empty()) {
    json s = json::array();
    for (const auto& pt : c.schedule) s.push_back({{"t_ms", pt.t_ms}, {"V0_Er", pt.V0_Er}});
    doc["schedule"] = s;
  }
  if (c.sweep) doc["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
  return doc;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("--set " + std::string(assignment) + ": expected key.path=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("--set " + path + ": empty key segment");
    if (!node->is_object()) throw ConfigError("--set " + path + ": '" + key + "' is not in an object");
    if (dot == std::string::npos) {
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig with_parameter(const RunConfig& config, std::string_view parameter, double value) {
  RunConfig c = config;
  c.sweep.reset();
  auto& p = c.physics;
  if (parameter == "w_z_um") {
    p.w_z_um = value;
  } else if (parameter == "V0_Er") {
    p.V0_Er = value;
  } else if (parameter == "V0_after_Er") {
    p.V0_after_Er = value;
  } else if (parameter == "p_in_pr") {
    p.p_in_pr = value;
  } else if (parameter == "sigma_p_pr") {
    p.sigma_p_pr = value;
  } else if (parameter == "t_ramp_ms") {
    p.t_ramp_ms = value;
  } else if (parameter == "box_length_um") {
    p.box_length_um = value;
  } else {
    throw ConfigError("sweep.parameter: '" + std::string(parameter) + "' is not a sweepable key");
  }
  return c;
}

}  // namespace finlat::cli
