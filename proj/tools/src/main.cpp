#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "io.hpp"
#include "runner.hpp"

#ifndef FINLAT_PRESET_DIR
#define FINLAT_PRESET_DIR "presets"
#endif
#ifndef FINLAT_SOURCE_PRESET_DIR
#define FINLAT_SOURCE_PRESET_DIR "presets"
#endif

namespace {

namespace fs = std::filesystem;
using namespace finlat::cli;

fs::path preset_path(const std::string& name) {
  if (const char* env = std::getenv("FINLAT_PRESET_DIR")) return fs::path(env) / (name + ".json");
  const fs::path installed = fs::path(FINLAT_PRESET_DIR) / (name + ".json");
  if (fs::exists(installed)) return installed;
  return fs::path(FINLAT_SOURCE_PRESET_DIR) / (name + ".json");
}

struct Invocation {
  std::string config_file;
  std::string preset;
  std::vector<std::string> overrides;
  std::string output;
  int workers = -1;
  bool check = false;
  bool quiet = false;
};

int execute(Mode mode, const Invocation& inv) {
  try {
    nlohmann::json doc = nlohmann::json::object();
    if (!inv.preset.empty()) doc = nlohmann::json::parse(read_file(preset_path(inv.preset)));
    if (!inv.config_file.empty()) {
      const auto file = nlohmann::json::parse(read_file(inv.config_file));
      doc.merge_patch(file);
    }
    doc["mode"] = std::string(to_string(mode));
    for (const auto& o : inv.overrides) apply_override(doc, o);
    if (!inv.output.empty()) doc["output"]["directory"] = inv.output;
    if (inv.workers >= 0) doc["numerics"]["workers"] = inv.workers;
    const auto config = parse_config(doc);
    RunOptions options;
    options.check_only = inv.check;
    options.log = inv.quiet ? nullptr : &std::clog;
    const int code = run_guarded(config, options, std::cerr);
    if (code == kExitOk && !inv.quiet) {
      std::clog << "wrote " << config.output.directory << "/manifest.json\n";
    }
    return code;
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matter-wave propagation through finite optical lattices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FINLAT_VERSION);

  struct Entry {
    Mode mode;
    const char* help;
  };
  const Entry entries[] = {
      {Mode::kBandmap, "Bloch bands and the local band map"},
      {Mode::kTransmission, "Transmission through a static lattice versus incident momentum"},
      {Mode::kPropagate, "Time-dependent propagation with ramp, trapping and revivals"},
      {Mode::kRevivalSweep, "Propagation runs over one swept parameter"},
      {Mode::kBoxOracle, "Hard-wall box revival reference"},
  };
  Invocation inv;
  std::vector<std::pair<CLI::App*, Mode>> commands;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(std::string(to_string(e.mode)), e.help);
    sub->add_option("config", inv.config_file, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--preset", inv.preset, "Named preset applied before the configuration file");
    sub->add_option("--set", inv.overrides, "Override a key, e.g. physics.w_z_um=35");
    sub->add_option("-o,--output", inv.output, "Output directory");
    sub->add_option("-j,--workers", inv.workers, "Worker threads (0: one per core)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--check", inv.check, "Run the convergence gates only");
    sub->add_flag("-q,--quiet", inv.quiet, "Suppress progress output");
    commands.emplace_back(sub, e.mode);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (const auto& [sub, mode] : commands) {
    if (sub->parsed()) return execute(mode, inv);
  }
  return kExitConfig;
}
