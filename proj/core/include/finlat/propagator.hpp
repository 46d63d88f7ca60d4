#pragma once

// Split-operator propagation of the axial Schroedinger equation
//   i d/dt psi = -d^2/dz^2 psi - V0(t) exp(-2 z^2 / w_z^2) cos^2(z) psi
// in recoil units, with absorbing boundaries or hard walls.

#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "finlat/bloch.hpp"
#include "finlat/units.hpp"

namespace finlat {

using cplx = std::complex<double>;

enum class Boundary {
  kAbsorbing,  // periodic FFT with cosine masks on the outer 10% of each side
  kHardWall,   // Dirichlet walls just outside the first and last grid points
};

struct SpatialGrid {
  double z_min = 0.0;
  double z_max = 0.0;
  std::size_t n = 0;
  Boundary boundary = Boundary::kAbsorbing;

  /// Periodic grid: n points, spacing (z_max - z_min) / n, first point z_min.
  /// Hard wall: walls at z_min and z_max, n interior points.
  static SpatialGrid periodic(double z_min, double z_max, std::size_t n);
  static SpatialGrid hard_wall(double z_min, double z_max, std::size_t n);

  double dz() const;
  double z(std::size_t i) const;
  /// Inner edge of the left/right absorber (10% of the span from each end).
  double absorber_left() const { return z_min + 0.1 * (z_max - z_min); }
  double absorber_right() const { return z_max - 0.1 * (z_max - z_min); }
  bool operator==(const SpatialGrid&) const = default;
};

struct WavePacketState {
  SpatialGrid grid;
  std::vector<cplx> psi;
  double time = 0.0;
  double absorbed_left = 0.0;
  double absorbed_right = 0.0;

  double norm() const;
  /// Probability on [a, b].
  double norm_between(double a, double b) const;
  /// Grid norm plus everything absorbed so far; one for a well-posed run.
  double total_probability() const { return norm() + absorbed_left + absorbed_right; }
  double mean_position() const;
  double mean_position_between(double a, double b) const;
};

/// Piecewise-linear depth schedule V0(t) with constant extrapolation.
class RampSchedule {
 public:
  RampSchedule() = default;
  explicit RampSchedule(std::vector<std::pair<double, double>> breakpoints);

  static RampSchedule constant(double depth);
  static RampSchedule linear_ramp(double t_start, double duration, double from, double to);

  double depth(double t) const;
  const std::vector<std::pair<double, double>>& breakpoints() const { return points_; }
  /// Shifted copy: every breakpoint time plus `offset`.
  RampSchedule shifted(double offset) const;
  double start() const { return points_.front().first; }
  double end() const { return points_.back().first; }

 private:
  std::vector<std::pair<double, double>> points_{{0.0, 0.0}};
};

struct GaussianPacket {
  double z0;       // centre, recoil lengths
  double sigma_p;  // kernel width: |phi(p)|^2 ~ exp(-(p - p_in)^2 / sigma_p^2)
  double p_in;     // mean momentum, p_R
  /// Standard deviation of |psi(z)|^2, 1 / (sqrt(2) sigma_p).
  double position_width() const;
};

struct PacketDiagnostics {
  double position_width;
  double edge_tail;    // probability inside the absorbers / next to the walls
  bool regime_ok;      // packet narrower than 0.5 w_z and wider than a period
};

/// Normalised minimum-uncertainty Gaussian. Throws DomainError when the tail
/// reaching the absorbers exceeds 1e-12.
WavePacketState initial_gaussian(const GaussianPacket& packet, const SpatialGrid& grid);

PacketDiagnostics check_packet(const GaussianPacket& packet, const SpatialGrid& grid,
                               double waist);

/// exp(-2 z^2 / w^2) cos^2(z); the lattice is -depth times this shape.
std::vector<double> lattice_shape(const SpatialGrid& grid, double waist);

/// One propagation's worth of FFT plans, phases and work buffers. Not shared
/// between threads.
class SplitOperator {
 public:
  /// `shape` is the potential per unit depth on the grid (empty: free).
  SplitOperator(SpatialGrid grid, std::vector<double> shape, double dt);
  ~SplitOperator();
  SplitOperator(const SplitOperator&) = delete;
  SplitOperator& operator=(const SplitOperator&) = delete;
  SplitOperator(SplitOperator&&) noexcept;
  SplitOperator& operator=(SplitOperator&&) noexcept;

  double dt() const { return dt_; }
  const SpatialGrid& grid() const { return grid_; }

  /// Symmetric step: half potential, full kinetic, half potential, then
  /// absorption. `depth` is V0 at mid-step. Throws NumericalError when the
  /// unitary part changes the norm by more than 1e-10.
  void step(WavePacketState& state, double depth);
  /// Same as step() with a negative time step (for reversibility checks).
  void step_backward(WavePacketState& state, double depth);

  /// <H> / <1> for the current state at this depth.
  double energy(const WavePacketState& state, double depth);
  double mean_momentum(const WavePacketState& state);
  /// Momentum-space probability per grid wavenumber (FFT order).
  std::vector<double> momentum_density(const WavePacketState& state);
  std::vector<double> wavenumbers() const;

 private:
  struct Plans;
  void unitary(WavePacketState& state, double depth, double dt);
  void update_potential_phase(double depth, double dt);
  void absorb(WavePacketState& state);

  SpatialGrid grid_;
  std::vector<double> shape_;
  double dt_;
  std::vector<cplx> kinetic_phase_;   // for +dt
  std::vector<cplx> kinetic_phase_back_;
  std::vector<double> k2_;
  std::vector<cplx> potential_phase_;
  double cached_depth_ = -1.0;
  double cached_dt_ = 0.0;
  std::vector<double> mask_;
  std::size_t left_end_ = 0, right_begin_ = 0;  // absorber index ranges
  std::unique_ptr<Plans> plans_;
};

/// Binary checkpoint of the full state; bit-exact round trip.
void write_checkpoint(const WavePacketState& state, std::ostream& out);
WavePacketState read_checkpoint(std::istream& in);
void save_checkpoint(const WavePacketState& state, const std::string& path);
WavePacketState load_checkpoint(const std::string& path);

}  // namespace finlat
