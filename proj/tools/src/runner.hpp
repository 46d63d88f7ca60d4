#pragma once

// Executes a RunConfig and writes its artifacts plus manifest.json into the
// output directory.

#include <iosfwd>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "finlat/experiment.hpp"
#include "finlat/units.hpp"

namespace finlat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

struct RunOptions {
  bool check_only = false;     // convergence gates only
  std::ostream* log = nullptr;  // progress lines
};

LatticeGeometry make_geometry(const Physics& physics);
RecoilUnits make_units(const Physics& physics);
ExperimentConfig make_experiment(const RunConfig& config);

/// Convergence-gate horizon in recoil times: numerics.check_horizon_ms, or
/// 1.5 times the free-flight arrival at the lattice centre, capped at t_final.
double gate_horizon(const RunConfig& config, const ExperimentConfig& experiment);

/// Runs the configuration. Returns kExitOk, or kExitNumerical when a
/// convergence gate fails under --check or numerics.enforce_gates. Throws
/// ConfigError, DomainError, NumericalError and IoError.
int run(const RunConfig& config, const RunOptions& options = {});

/// run() with exceptions mapped to exit codes and reported on `err`.
int run_guarded(const RunConfig& config, const RunOptions& options, std::ostream& err);

/// Worker count for runs of `grid_points` complex samples each.
int worker_count(int requested, std::size_t grid_points, std::size_t jobs);

}  // namespace finlat::cli
