#include "finlat/bloch.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

namespace finlat {

namespace {

constexpr double kTruncationTolerance = 1e-10;
constexpr int kMaxBasisSize = 401;
constexpr double kDerivativeStep = 1e-3;

std::vector<double> planewave_eigenvalues(double depth, double k, int basis_size) {
  const int half = basis_size / 2;
  Eigen::VectorXd diag(basis_size);
  Eigen::VectorXd sub = Eigen::VectorXd::Constant(basis_size - 1, -0.25 * depth);
  for (int j = -half; j <= half; ++j) {
    const double q = k + 2.0 * j;
    diag(j + half) = q * q - 0.5 * depth;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

}  // namespace

std::vector<double> diagonalize_bloch(double depth, double k, int n_bands, int basis_size) {
  if (basis_size < 11 || basis_size % 2 == 0) {
    throw DomainError("plane-wave basis size must be odd and >= 11");
  }
  if (n_bands < 1) throw DomainError("at least one band must be requested");
  // Retained bands must sit well inside the basis.
  basis_size = std::max(basis_size, 2 * n_bands + 11);

  auto current = planewave_eigenvalues(depth, k, basis_size);
  while (true) {
    if (basis_size + 4 > kMaxBasisSize) {
      throw NumericalError("plane-wave truncation did not converge below 1e-10 E_R at depth " +
                           std::to_string(depth));
    }
    auto next = planewave_eigenvalues(depth, k, basis_size + 4);
    double shift = 0.0;
    for (int n = 0; n < n_bands; ++n) shift = std::max(shift, std::abs(next[n] - current[n]));
    basis_size += 4;
    current = std::move(next);
    if (shift < kTruncationTolerance) break;
  }
  current.resize(static_cast<std::size_t>(n_bands));
  return current;
}

double band_energy(double depth, int band, double k) {
  if (band < 1) throw DomainError("band index starts at 1");
  return diagonalize_bloch(depth, k, band).back();
}

BlochBands compute_bands(double depth, std::span<const double> k_grid, int n_bands,
                         int basis_size) {
  BlochBands out{depth, {k_grid.begin(), k_grid.end()}, {}, basis_size};
  out.energies.assign(static_cast<std::size_t>(n_bands), std::vector<double>(k_grid.size()));
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    const auto e = diagonalize_bloch(depth, k_grid[i], n_bands, basis_size);
    for (int n = 0; n < n_bands; ++n) out.energies[n][i] = e[n];
  }
  return out;
}

std::vector<Interval> allowed_bands_planewave(double depth, int n_bands) {
  const auto centre = diagonalize_bloch(depth, 0.0, n_bands);
  const auto edge = diagonalize_bloch(depth, 1.0, n_bands);
  std::vector<Interval> bands;
  bands.reserve(static_cast<std::size_t>(n_bands));
  for (int n = 0; n < n_bands; ++n) {
    bands.push_back({std::min(centre[n], edge[n]), std::max(centre[n], edge[n])});
  }
  return bands;
}

double effective_mass(double depth, int band, double k) {
  auto curvature = [&](double h) {
    return (band_energy(depth, band, k + h) - 2.0 * band_energy(depth, band, k) +
            band_energy(depth, band, k - h)) /
           (h * h);
  };
  const double h = kDerivativeStep;
  const double d2 = (4.0 * curvature(0.5 * h) - curvature(h)) / 3.0;
  if (std::abs(d2) < 1e-6) {
    throw DivergentMass("band curvature vanishes at band " + std::to_string(band) +
                        ", k=" + std::to_string(k));
  }
  return 2.0 / d2;
}

double group_velocity(double depth, int band, double k) {
  auto slope = [&](double h) {
    return (band_energy(depth, band, k + h) - band_energy(depth, band, k - h)) / (2.0 * h);
  };
  const double h = kDerivativeStep;
  const double d1 = (4.0 * slope(0.5 * h) - slope(h)) / 3.0;
  return 0.5 * d1;
}

// ---------------------------------------------------------------------------
// Monodromy route

MonodromySolver::MonodromySolver(int steps_per_period) : steps_(steps_per_period) {
  if (steps_ < 512 || steps_ % 2 != 0) {
    throw DomainError("monodromy integration needs an even step count >= 512");
  }
  const double h = constants::pi / steps_;
  cos2_.resize(static_cast<std::size_t>(2 * steps_ + 1));
  for (std::size_t j = 0; j < cos2_.size(); ++j) {
    const double c = std::cos(0.5 * h * static_cast<double>(j));
    cos2_[j] = c * c;
  }
}

namespace {

struct Pair {
  double y, dy;
};

// Advances two solutions of y'' = q(x) y through `steps` RK4 steps starting at
// node index `first` (in half steps).
void rk4_advance(std::span<const double> cos2, double h, double depth, double energy,
                 int steps, Pair& a, Pair& b) {
  for (int s = 0; s < steps; ++s) {
    const std::size_t j = 2 * static_cast<std::size_t>(s);
    const double q0 = -depth * cos2[j] - energy;
    const double q1 = -depth * cos2[j + 1] - energy;
    const double q2 = -depth * cos2[j + 2] - energy;
    for (Pair* p : {&a, &b}) {
      const double y = p->y, dy = p->dy;
      const double k1y = dy, k1d = q0 * y;
      const double k2y = dy + 0.5 * h * k1d, k2d = q1 * (y + 0.5 * h * k1y);
      const double k3y = dy + 0.5 * h * k2d, k3d = q1 * (y + 0.5 * h * k2y);
      const double k4y = dy + h * k3d, k4d = q2 * (y + h * k3y);
      p->y = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
      p->dy = dy + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    }
  }
}

}  // namespace

Matrix2 MonodromySolver::monodromy(double depth, double energy) const {
  Pair a{1.0, 0.0}, b{0.0, 1.0};
  rk4_advance(cos2_, constants::pi / steps_, depth, energy, steps_, a, b);
  return {{{a.y, b.y}, {a.dy, b.dy}}};
}

HalfCell MonodromySolver::half_cell(double depth, double energy) const {
  Pair u{1.0, 0.0}, v{0.0, 1.0};
  rk4_advance(cos2_, constants::pi / steps_, depth, energy, steps_ / 2, u, v);
  return {u.y, u.dy, v.y, v.dy};
}

ComplexK complex_from_half_trace(double d) {
  if (std::abs(d) <= 1.0) return {std::acos(d) / constants::pi, 0.0};
  return {d > 0.0 ? 0.0 : 1.0, std::acosh(std::abs(d)) / constants::pi};
}

ComplexK MonodromySolver::complex_k(double depth, double energy) const {
  return complex_from_half_trace(half_trace(depth, energy));
}

MonodromySolver MonodromySolver::calibrated(double max_depth, double max_energy,
                                            double tolerance) {
  int steps = 1024;
  const double e_low = -max_depth;
  while (true) {
    const MonodromySolver coarse(steps), fine(2 * steps);
    double change = 0.0;
    for (double e : {e_low, 0.5 * (e_low + max_energy), max_energy}) {
      const double dc = coarse.half_trace(max_depth, e);
      const double df = fine.half_trace(max_depth, e);
      change = std::max(change, std::abs(dc - df) / std::max(1.0, std::abs(df)));
    }
    if (change < tolerance) return coarse;
    steps *= 2;
    if (steps > (1 << 18)) {
      throw NumericalError("monodromy step doubling did not reach tolerance");
    }
  }
}

std::vector<double> MonodromySolver::band_edges(double depth, double e_min, double e_max,
                                                double scan_step) const {
  auto values = [&](double e) {
    const HalfCell c = half_cell(depth, e);
    return std::array<double, 4>{c.u, c.du, c.v, c.dv};
  };
  std::vector<double> edges;
  double e_prev = e_min;
  auto f_prev = values(e_prev);
  for (int c = 0; c < 4; ++c) {
    if (f_prev[c] == 0.0) edges.push_back(e_prev);
  }
  const int n = static_cast<int>(std::ceil((e_max - e_min) / scan_step));
  for (int i = 1; i <= n; ++i) {
    const double e = e_min + (e_max - e_min) * i / n;
    const auto f = values(e);
    for (int c = 0; c < 4; ++c) {
      if (f[c] == 0.0) {
        edges.push_back(e);
      } else if (f_prev[c] != 0.0 && (f[c] > 0.0) != (f_prev[c] > 0.0)) {
        double lo = e_prev, hi = e, flo = f_prev[c];
        for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fm = values(mid)[c];
          if (fm == 0.0) {
            lo = hi = mid;
            break;
          }
          if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        edges.push_back(0.5 * (lo + hi));
      }
    }
    e_prev = e;
    f_prev = f;
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::vector<Interval> MonodromySolver::allowed_bands(double depth, int n_bands) const {
  const double e_min = -depth - 1.0;
  double e_max = static_cast<double>(n_bands * n_bands) + 1.0;
  std::vector<double> edges = band_edges(depth, e_min, e_max);
  while (static_cast<int>(edges.size()) < 2 * n_bands) {
    e_max += 4.0 * n_bands;
    edges = band_edges(depth, e_min, e_max);
  }
  std::vector<Interval> bands;
  for (int n = 0; n < n_bands; ++n) bands.push_back({edges[2 * n], edges[2 * n + 1]});
  return bands;
}

ComplexDispersion complex_dispersion(const MonodromySolver& solver, double depth,
                                     std::span<const double> energy_grid) {
  ComplexDispersion out{depth, {energy_grid.begin(), energy_grid.end()}, {}, {}};
  out.im_k.reserve(energy_grid.size());
  out.re_k.reserve(energy_grid.size());
  for (double e : energy_grid) {
    const auto ck = solver.complex_k(depth, e);
    out.im_k.push_back(ck.im_k);
    out.re_k.push_back(ck.re_k);
  }
  return out;
}

int band_index(double depth, double energy, int max_band) {
  const auto bands = allowed_bands_planewave(depth, max_band);
  for (int n = 0; n < max_band; ++n) {
    if (energy >= bands[n].lo && energy <= bands[n].hi) return n + 1;
  }
  return 0;
}

}  // namespace finlat
