#pragma once

// Run configuration of the finlat tool: a JSON document whose keys carry
// their units (w_z_um, V0_Er, t_ramp_ms, ...).

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace finlat::cli {

/// Invalid configuration; the message starts with the key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { kBandmap, kTransmission, kPropagate, kRevivalSweep, kBoxOracle };

std::string_view to_string(Mode mode);
std::optional<Mode> mode_from_string(std::string_view name);

struct Physics {
  double period_nm = 390.0;
  std::optional<double> wavelength_nm;  // with angle_deg: lattice from two crossing beams
  std::optional<double> angle_deg;
  double w_z_um = 50.0;
  double mass_amu = 86.909180527;  // 87Rb
  double V0_Er = 9.0;              // depth before the ramp
  std::optional<double> V0_after_Er;
  double t_ramp_ms = 0.0;
  std::string ramp_trigger = "pilot";  // pilot | free_flight | fixed | mean_crossing
  std::optional<double> t_ramp_mid_ms;  // fixed trigger only
  double p_in_pr = 2.4;
  double sigma_p_pr = 0.0325;
  std::optional<double> z0_um;  // default -3 w_z
  double box_length_um = 20.0;
};

struct Numerics {
  double dt_tR = 0.05;
  std::optional<double> dz_max_nm;  // default P / 12, at most P / 8
  double t_final_ms = 300.0;
  double sample_interval_ms = 0.1;
  double collapse_threshold = 0.2;
  double revival_threshold = 0.5;
  double v_min_vR = 0.01;
  std::string mass_model = "energy";  // energy | central
  double kappa_min_kL = 1e-4;
  int map_points = 2048;
  double p_min_pr = 1.0;
  double p_max_pr = 3.2;
  int p_count = 23;
  bool tdse = false;
  double tdse_stop_below = 1e-3;
  bool carpet = false;
  double carpet_interval_ms = 0.5;
  std::optional<double> check_horizon_ms;  // default 1.5x free-flight arrival at the centre
  bool enforce_gates = false;
  int box_points = 1023;
  int box_samples = 8000;
  int workers = 0;  // 0: one per core
};

struct SchedulePoint {
  double t_ms;
  double V0_Er;
};

struct Sweep {
  std::string parameter;
  std::vector<double> values;
};

struct Output {
  std::string directory = "finlat_out";
  bool csv = true;
  bool json = true;
};

struct RunConfig {
  Mode mode = Mode::kPropagate;
  Physics physics;
  Numerics numerics;
  std::vector<SchedulePoint> schedule;  // empty: ramp from the physics block
  std::optional<Sweep> sweep;
  Output output;
};

inline constexpr std::array<std::string_view, 7> kSweepParameters = {
    "w_z_um", "V0_Er", "V0_after_Er", "p_in_pr", "sigma_p_pr", "t_ramp_ms", "box_length_um"};

RunConfig parse_config_text(std::string_view text);
RunConfig parse_config(const nlohmann::json& doc);

/// Effective configuration with every default filled in.
nlohmann::json to_json(const RunConfig& config);

/// Applies "a.b.c=value" to a document; value is read as JSON when it
/// parses, else as a string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Copy with the sweep parameter set to `value` and the sweep removed.
RunConfig with_parameter(const RunConfig& config, std::string_view parameter, double value);

}  // namespace finlat::cli
