#include "finlat/propagator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numeric>

namespace finlat {

using constants::pi;

namespace {

// FFTW planning is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Absorption rate at the outer edge of the masks, E_R / hbar.
constexpr double kAbsorberRate = 1.0;
constexpr double kNormDriftLimit = 1e-10;

double abs2(cplx c) { return c.real() * c.real() + c.imag() * c.imag(); }

}  // namespace

SpatialGrid SpatialGrid::periodic(double z_min, double z_max, std::size_t n) {
  if (!(z_max > z_min) || n < 16) throw DomainError("grid needs z_max > z_min and n >= 16");
  if ((n & (n - 1)) != 0) throw DomainError("grid size must be a power of two");
  return {z_min, z_max, n, Boundary::kAbsorbing};
}

SpatialGrid SpatialGrid::hard_wall(double z_min, double z_max, std::size_t n) {
  if (!(z_max > z_min) || n < 16) throw DomainError("grid needs z_max > z_min and n >= 16");
  return {z_min, z_max, n, Boundary::kHardWall};
}

double SpatialGrid::dz() const {
  const double span = z_max - z_min;
  return boundary == Boundary::kHardWall ? span / static_cast<double>(n + 1)
                                         : span / static_cast<double>(n);
}

double SpatialGrid::z(std::size_t i) const {
  const double offset = boundary == Boundary::kHardWall ? 1.0 : 0.0;
  return z_min + (static_cast<double>(i) + offset) * dz();
}

double WavePacketState::norm() const {
  double s = 0.0;
  for (const auto& c : psi) s += abs2(c);
  return s * grid.dz();
}

double WavePacketState::norm_between(double a, double b) const {
  double s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double z = grid.z(i);
    if (z >= a && z <= b) s += abs2(psi[i]);
  }
  return s * grid.dz();
}

double WavePacketState::mean_position() const {
  return mean_position_between(grid.z_min, grid.z_max);
}

double WavePacketState::mean_position_between(double a, double b) const {
  double s = 0.0, zs = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double z = grid.z(i);
    if (z < a || z > b) continue;
    const double w = abs2(psi[i]);
    s += w;
    zs += w * z;
  }
  return s > 0.0 ? zs / s : 0.0;
}

RampSchedule::RampSchedule(std::vector<std::pair<double, double>> breakpoints)
    : points_(std::move(breakpoints)) {
  if (points_.empty()) throw DomainError("ramp schedule needs at least one breakpoint");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i].second >= 0.0)) throw DomainError("ramp depths must be non-negative");
    if (i > 0 && !(points_[i].first > points_[i - 1].first)) {
      throw DomainError("ramp breakpoint times must be strictly increasing");
    }
  }
}

RampSchedule RampSchedule::constant(double depth) { return RampSchedule({{0.0, depth}}); }

RampSchedule RampSchedule::linear_ramp(double t_start, double duration, double from, double to) {
  if (!(duration > 0.0)) throw DomainError("ramp duration must be positive");
  return RampSchedule({{t_start, from}, {t_start + duration, to}});
}

double RampSchedule::depth(double t) const {
  if (t <= points_.front().first) return points_.front().second;
  if (t >= points_.back().first) return points_.back().second;
  const auto it = std::upper_bound(points_.begin(), points_.end(), t,
                                   [](double v, const auto& p) { return v < p.first; });
  const auto& [t1, d1] = *it;
  const auto& [t0, d0] = *(it - 1);
  return d0 + (d1 - d0) * (t - t0) / (t1 - t0);
}

RampSchedule RampSchedule::shifted(double offset) const {
  auto pts = points_;
  for (auto& p : pts) p.first += offset;
  return RampSchedule(std::move(pts));
}

double GaussianPacket::position_width() const { return 1.0 / (std::sqrt(2.0) * sigma_p); }

namespace {

double edge_probability(const WavePacketState& s) {
  const auto& g = s.grid;
  if (g.boundary == Boundary::kAbsorbing) {
    return s.norm_between(g.z_min, g.absorber_left()) + s.norm_between(g.absorber_right(), g.z_max);
  }
  const double band = 0.05 * (g.z_max - g.z_min);
  return s.norm_between(g.z_min, g.z_min + band) + s.norm_between(g.z_max - band, g.z_max);
}

}  // namespace

WavePacketState initial_gaussian(const GaussianPacket& packet, const SpatialGrid& grid) {
  if (!(packet.sigma_p > 0.0)) throw DomainError("sigma_p must be positive");
  WavePacketState s;
  s.grid = grid;
  s.psi.resize(grid.n);
  const double s2 = packet.sigma_p * packet.sigma_p;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double z = grid.z(i);
    const double d = z - packet.z0;
    s.psi[i] = std::exp(-0.5 * s2 * d * d) * std::polar(1.0, packet.p_in * z);
  }
  const double scale = 1.0 / std::sqrt(s.norm());
  for (auto& c : s.psi) c *= scale;
  if (edge_probability(s) > 1e-12) {
    throw DomainError("initial packet reaches the grid edge; enlarge the grid or move z0");
  }
  return s;
}

PacketDiagnostics check_packet(const GaussianPacket& packet, const SpatialGrid& grid,
                               double waist) {
  PacketDiagnostics d{};
  d.position_width = packet.position_width();
  WavePacketState s;
  s.grid = grid;
  s.psi.resize(grid.n);
  const double s2 = packet.sigma_p * packet.sigma_p;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double dz = grid.z(i) - packet.z0;
    s.psi[i] = std::exp(-0.5 * s2 * dz * dz);
  }
  const double norm = s.norm();
  d.edge_tail = norm > 0.0 ? edge_probability(s) / norm : 1.0;
  d.regime_ok = d.position_width < 0.5 * waist && d.position_width > pi;
  return d;
}

std::vector<double> lattice_shape(const SpatialGrid& grid, double waist) {
  std::vector<double> shape(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double z = grid.z(i);
    const double r = z / waist;
    const double c = std::cos(z);
    shape[i] = std::exp(-2.0 * r * r) * c * c;
  }
  return shape;
}

struct SplitOperator::Plans {
  std::size_t n;
  cplx* buffer = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;  // null for the sine transform (self-inverse)

  Plans(std::size_t size, Boundary boundary) : n(size) {
    std::lock_guard lock(planner_mutex());
    buffer = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * n));
    auto* raw = reinterpret_cast<fftw_complex*>(buffer);
    if (boundary == Boundary::kAbsorbing) {
      const int ni = static_cast<int>(n);
      forward = fftw_plan_dft_1d(ni, raw, raw, FFTW_FORWARD, FFTW_ESTIMATE);
      backward = fftw_plan_dft_1d(ni, raw, raw, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
      // Real and imaginary parts as two interleaved real sequences.
      int len = static_cast<int>(n);
      fftw_r2r_kind kind = FFTW_RODFT00;
      auto* re = reinterpret_cast<double*>(buffer);
      forward = fftw_plan_many_r2r(1, &len, 2, re, nullptr, 2, 1, re, nullptr, 2, 1, &kind,
                                   FFTW_ESTIMATE);
    }
    if (forward == nullptr) throw NumericalError("FFTW planning failed");
  }

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
    fftw_free(buffer);
  }

  void to_spectral() { fftw_execute(forward); }
  void to_position() { fftw_execute(backward ? backward : forward); }
};

SplitOperator::SplitOperator(SpatialGrid grid, std::vector<double> shape, double dt)
    : grid_(grid), shape_(std::move(shape)), dt_(dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (shape_.empty()) shape_.assign(grid_.n, 0.0);
  if (shape_.size() != grid_.n) throw DomainError("potential shape does not match the grid");

  const std::size_t n = grid_.n;
  const double dz = grid_.dz();
  k2_.resize(n);
  double scale = 0.0;
  if (grid_.boundary == Boundary::kAbsorbing) {
    const double dk = 2.0 * pi / (static_cast<double>(n) * dz);
    for (std::size_t j = 0; j < n; ++j) {
      const double m = j < n / 2 ? static_cast<double>(j)
                                 : static_cast<double>(j) - static_cast<double>(n);
      k2_[j] = (m * dk) * (m * dk);
    }
    scale = 1.0 / static_cast<double>(n);
  } else {
    const double dk = pi / (static_cast<double>(n + 1) * dz);
    for (std::size_t j = 0; j < n; ++j) {
      const double k = static_cast<double>(j + 1) * dk;
      k2_[j] = k * k;
    }
    scale = 1.0 / (2.0 * static_cast<double>(n + 1));
  }
  kinetic_phase_.resize(n);
  kinetic_phase_back_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    kinetic_phase_[j] = std::polar(scale, -k2_[j] * dt_);
    kinetic_phase_back_[j] = std::polar(scale, k2_[j] * dt_);
  }

  mask_.assign(n, 1.0);
  if (grid_.boundary == Boundary::kAbsorbing) {
    const double width = grid_.absorber_left() - grid_.z_min;
    left_end_ = 0;
    right_begin_ = n;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = grid_.z(i);
      double s = 0.0;
      if (z < grid_.absorber_left()) {
        s = (grid_.absorber_left() - z) / width;
        left_end_ = i + 1;
      } else if (z > grid_.absorber_right()) {
        s = (z - grid_.absorber_right()) / width;
        right_begin_ = std::min(right_begin_, i);
      }
      mask_[i] = std::exp(-kAbsorberRate * 0.5 * (1.0 - std::cos(pi * s)) * dt_);
    }
  }
  plans_ = std::make_unique<Plans>(n, grid_.boundary);
}

SplitOperator::~SplitOperator() = default;
SplitOperator::SplitOperator(SplitOperator&&) noexcept = default;
SplitOperator& SplitOperator::operator=(SplitOperator&&) noexcept = default;

std::vector<double> SplitOperator::wavenumbers() const {
  std::vector<double> k(grid_.n);
  for (std::size_t j = 0; j < grid_.n; ++j) {
    const double mag = std::sqrt(k2_[j]);
    const bool negative = grid_.boundary == Boundary::kAbsorbing && j >= grid_.n / 2;
    k[j] = negative ? -mag : mag;
  }
  return k;
}

void SplitOperator::update_potential_phase(double depth, double dt) {
  if (depth == cached_depth_ && dt == cached_dt_ && !potential_phase_.empty()) return;
  potential_phase_.resize(grid_.n);
  const double a = 0.5 * depth * dt;  // exp(-i V dt/2) with V = -depth * shape
  for (std::size_t i = 0; i < grid_.n; ++i) potential_phase_[i] = std::polar(1.0, a * shape_[i]);
  cached_depth_ = depth;
  cached_dt_ = dt;
}

void SplitOperator::unitary(WavePacketState& state, double depth, double dt) {
  if (state.psi.size() != grid_.n) throw DomainError("state does not match the propagator grid");
  update_potential_phase(depth, dt);
  const auto& kin = dt > 0.0 ? kinetic_phase_ : kinetic_phase_back_;
  const std::size_t n = grid_.n;
  cplx* buf = plans_->buffer;
  double before = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    before += abs2(state.psi[i]);
    buf[i] = state.psi[i] * potential_phase_[i];
  }
  plans_->to_spectral();
  for (std::size_t j = 0; j < n; ++j) buf[j] *= kin[j];
  plans_->to_position();
  double after = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    state.psi[i] = buf[i] * potential_phase_[i];
    after += abs2(state.psi[i]);
  }
  const double dz = grid_.dz();
  if (!(std::abs(after - before) * dz <= kNormDriftLimit)) {
    throw NumericalError("split-operator step changed the norm by " +
                         std::to_string(std::abs(after - before) * dz));
  }
  state.time += dt;
}

void SplitOperator::absorb(WavePacketState& state) {
  if (grid_.boundary != Boundary::kAbsorbing) return;
  const double dz = grid_.dz();
  double left = 0.0, right = 0.0;
  for (std::size_t i = 0; i < left_end_; ++i) {
    const double p = abs2(state.psi[i]);
    state.psi[i] *= mask_[i];
    left += p - abs2(state.psi[i]);
  }
  for (std::size_t i = right_begin_; i < grid_.n; ++i) {
    const double p = abs2(state.psi[i]);
    state.psi[i] *= mask_[i];
    right += p - abs2(state.psi[i]);
  }
  state.absorbed_left += left * dz;
  state.absorbed_right += right * dz;
}

void SplitOperator::step(WavePacketState& state, double depth) {
  unitary(state, depth, dt_);
  absorb(state);
}

void SplitOperator::step_backward(WavePacketState& state, double depth) {
  unitary(state, depth, -dt_);
}

std::vector<double> SplitOperator::momentum_density(const WavePacketState& state) {
  const std::size_t n = grid_.n;
  cplx* buf = plans_->buffer;
  std::copy(state.psi.begin(), state.psi.end(), buf);
  plans_->to_spectral();
  // Parseval: sum |psi|^2 dz == sum density
  const double norm = grid_.boundary == Boundary::kAbsorbing
                          ? grid_.dz() / static_cast<double>(n)
                          : grid_.dz() / (2.0 * static_cast<double>(n + 1));
  std::vector<double> d(n);
  for (std::size_t j = 0; j < n; ++j) d[j] = abs2(buf[j]) * norm;
  return d;
}

double SplitOperator::mean_momentum(const WavePacketState& state) {
  if (grid_.boundary == Boundary::kHardWall) {
    // <p> = Im sum psi* dpsi/dz dz; central differences, zero beyond the walls
    const std::size_t n = grid_.n;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const cplx next = i + 1 < n ? state.psi[i + 1] : cplx{};
      const cplx prev = i > 0 ? state.psi[i - 1] : cplx{};
      s += (std::conj(state.psi[i]) * (next - prev)).imag();
    }
    return 0.5 * s / state.norm();
  }
  const auto d = momentum_density(state);
  const auto k = wavenumbers();
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    num += k[j] * d[j];
    den += d[j];
  }
  return den > 0.0 ? num / den : 0.0;
}

double SplitOperator::energy(const WavePacketState& state, double depth) {
  const auto d = momentum_density(state);
  double kinetic = 0.0, norm_k = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    kinetic += k2_[j] * d[j];
    norm_k += d[j];
  }
  double potential = 0.0;
  for (std::size_t i = 0; i < grid_.n; ++i) potential -= depth * shape_[i] * abs2(state.psi[i]);
  potential *= grid_.dz();
  return (kinetic + potential) / norm_k;
}

namespace {

constexpr char kMagic[8] = {'F', 'L', 'A', 'T', 'C', 'K', 'P', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::ios_base::failure("truncated checkpoint");
  return v;
}

}  // namespace

void write_checkpoint(const WavePacketState& state, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, state.grid.boundary == Boundary::kHardWall ? 1u : 0u);
  put<std::uint64_t>(out, state.grid.n);
  put(out, state.grid.z_min);
  put(out, state.grid.z_max);
  put(out, state.time);
  put(out, state.absorbed_left);
  put(out, state.absorbed_right);
  out.write(reinterpret_cast<const char*>(state.psi.data()),
            static_cast<std::streamsize>(state.psi.size() * sizeof(cplx)));
  if (!out) throw std::ios_base::failure("checkpoint write failed");
}

WavePacketState read_checkpoint(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::ios_base::failure("not a finlat checkpoint");
  }
  WavePacketState s;
  s.grid.boundary = get<std::uint32_t>(in) == 1u ? Boundary::kHardWall : Boundary::kAbsorbing;
  s.grid.n = static_cast<std::size_t>(get<std::uint64_t>(in));
  s.grid.z_min = get<double>(in);
  s.grid.z_max = get<double>(in);
  s.time = get<double>(in);
  s.absorbed_left = get<double>(in);
  s.absorbed_right = get<double>(in);
  if (s.grid.n == 0 || s.grid.n > (std::size_t{1} << 32)) {
    throw std::ios_base::failure("corrupt checkpoint header");
  }
  s.psi.resize(s.grid.n);
  in.read(reinterpret_cast<char*>(s.psi.data()),
          static_cast<std::streamsize>(s.psi.size() * sizeof(cplx)));
  if (!in) throw std::ios_base::failure("truncated checkpoint");
  return s;
}

void save_checkpoint(const WavePacketState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path);
  write_checkpoint(state, out);
}

WavePacketState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace finlat
