#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "config.hpp"
#include "io.hpp"
#include "runner.hpp"

using namespace finlat;
using namespace finlat::cli;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("finlat_test_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("canonical configuration parses with defaults filled in") {
  const auto c = parse_config_text(R"({"mode": "propagate",
    "physics": {"w_z_um": 50, "V0_Er": 9, "V0_after_Er": 15, "t_ramp_ms": 1}})");
  CHECK(c.mode == Mode::kPropagate);
  CHECK(c.physics.period_nm == 390.0);
  CHECK(c.physics.V0_after_Er.value() == 15.0);
  CHECK(c.numerics.dt_tR == 0.05);
  CHECK(c.physics.ramp_trigger == "pilot");

  const auto round = parse_config(to_json(c));
  CHECK(to_json(round) == to_json(c));
}

TEST_CASE("invalid configurations name the offending key") {
  CHECK(error_of(R"({"physics": {"w_z_um": -3}})").starts_with("physics.w_z_um"));
  CHECK(error_of(R"({"physics": {"wz_um": 50}})") == "physics.wz_um: unknown key");
  CHECK(error_of(R"({"physics": {"V0_Er": "deep"}})").starts_with("physics.V0_Er"));
  CHECK(error_of(R"({"mode": "warp"})").starts_with("mode"));
  CHECK(error_of(R"({"mode": "propagate", "sweep": {"parameter": "w_z_um", "values": [1]}})")
            .starts_with("sweep"));
  CHECK(error_of(R"({"mode": "revival_sweep", "sweep": {"parameter": "hbar", "values": [1]}})")
            .starts_with("sweep.parameter"));
}

TEST_CASE("overrides and sweep substitution") {
  nlohmann::json doc = {{"mode", "propagate"}};
  apply_override(doc, "physics.w_z_um=35");
  apply_override(doc, "physics.ramp_trigger=fixed");
  apply_override(doc, "physics.t_ramp_mid_ms=12.5");
  const auto c = parse_config(doc);
  CHECK(c.physics.w_z_um == 35.0);
  CHECK(c.physics.ramp_trigger == "fixed");
  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ConfigError);

  const auto s = with_parameter(c, "V0_after_Er", 17.0);
  CHECK(s.physics.V0_after_Er.value() == 17.0);
  CHECK_FALSE(s.sweep.has_value());
}

TEST_CASE("experiment construction converts units") {
  auto c = parse_config_text(R"({"physics": {"w_z_um": 50, "V0_Er": 9, "V0_after_Er": 15,
                                         "t_ramp_ms": 1}})");
  const auto u = make_units(c.physics);
  const auto e = make_experiment(c);
  CHECK(u.t_R * 1e6 == doctest::Approx(42.18).epsilon(1e-3));
  CHECK(e.geometry.waist_recoil() == doctest::Approx(50e-6 * constants::pi / 390e-9));
  CHECK(e.packet.z0 == doctest::Approx(-3.0 * e.geometry.waist_recoil()));
  CHECK(e.grid.dz() <= constants::pi / 12.0 + 1e-12);

  c.numerics.dz_max_nm = 60.0;
  CHECK_THROWS_AS(make_experiment(c), ConfigError);
  c.numerics.dz_max_nm = 45.0;
  CHECK(make_experiment(c).grid.dz() <= 45e-9 / make_units(c.physics).x_R);

  c.numerics.dz_max_nm.reset();
  c.physics.wavelength_nm = 780.0;
  c.physics.angle_deg = 180.0;
  CHECK(make_geometry(c.physics).period == doctest::Approx(390e-9));
}

TEST_CASE("repeated runs produce identical artifacts") {
  const auto a = scratch("a"), b = scratch("b");
  auto c = parse_config_text(R"({"mode": "box_oracle",
    "physics": {"box_length_um": 10}, "numerics": {"box_points": 255, "box_samples": 400}})");
  c.output.directory = a.string();
  REQUIRE(run(c) == kExitOk);
  c.output.directory = b.string();
  REQUIRE(run(c) == kExitOk);
  for (const char* f : {"box_trace.csv", "report.json"}) {
    CHECK(read_file(a / f) == read_file(b / f));
  }
  auto ma = nlohmann::json::parse(read_file(a / "manifest.json"));
  auto mb = nlohmann::json::parse(read_file(b / "manifest.json"));
  ma["config"]["output"].erase("directory");
  mb["config"]["output"].erase("directory");
  CHECK(ma == mb);
  CHECK(ma["files"].size() == 2);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("errors map to exit codes") {
  auto c = parse_config_text(R"({"mode": "box_oracle", "physics": {"box_length_um": 10}})");
  c.output.directory = "/proc/finlat_cannot_exist";
  std::ostringstream err;
  CHECK(run_guarded(c, {}, err) == kExitIo);
  CHECK(err.str().starts_with("i/o error"));
}

TEST_CASE("worker count respects the job count") {
  CHECK(worker_count(8, 1024, 3) == 3);
  CHECK(worker_count(1, 1024, 10) == 1);
  CHECK(worker_count(0, 1024, 1) == 1);
}
