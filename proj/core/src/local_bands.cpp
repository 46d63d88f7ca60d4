#include "finlat/local_bands.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "finlat/parallel.hpp"

namespace finlat {

double local_depth(double z, double waist, double peak_depth) {
  const double r = z / waist;
  return peak_depth * std::exp(-2.0 * r * r);
}

std::vector<double> symmetric_grid(double half_span, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // exact mirror symmetry: g[n-1-i] == -g[i]
    const double x = half_span * (2.0 * i - (n - 1)) / (n - 1);
    g[static_cast<std::size_t>(i)] = x;
  }
  for (int i = 0; i < n / 2; ++i) g[n - 1 - i] = -g[i];
  if (n % 2 == 1) g[n / 2] = 0.0;
  return g;
}

LocalBandMap::LocalBandMap(LatticeGeometry geometry, double peak_depth,
                           std::vector<double> z_grid, std::vector<double> p_grid,
                           MonodromySolver solver)
    : geometry_(std::move(geometry)),
      peak_depth_(peak_depth),
      waist_(geometry_.waist_recoil()),
      z_(std::move(z_grid)),
      p_(std::move(p_grid)),
      solver_(std::move(solver)),
      im_(z_.size() * p_.size(), 0.0),
      re_(z_.size() * p_.size(), 0.0) {}

std::vector<double> LocalBandMap::half_axis() const {
  std::vector<double> h;
  h.push_back(0.0);
  for (double z : z_) {
    if (z > 0.0) h.push_back(z);
  }
  std::sort(h.begin(), h.end());
  return h;
}

LocalBandMap build_band_map(const LatticeGeometry& geometry, double peak_depth,
                            std::vector<double> p_grid, std::vector<double> z_grid) {
  if (peak_depth < 0.0) throw DomainError("peak depth must be non-negative");
  if (p_grid.empty() || z_grid.size() < 2) throw DomainError("empty band-map grid");
  for (double p : p_grid) {
    if (!(p > 0.0)) throw DomainError("band-map momenta must be positive");
  }
  std::sort(z_grid.begin(), z_grid.end());
  const double w = geometry.waist_recoil();
  if (z_grid.front() > -4.0 * w * (1 - 1e-12) || z_grid.back() < 4.0 * w * (1 - 1e-12)) {
    throw DomainError("band-map z grid must span at least +-4 w_z");
  }
  const double p_max = *std::max_element(p_grid.begin(), p_grid.end());
  auto solver = MonodromySolver::calibrated(std::max(peak_depth, 1.0), p_max * p_max, 1e-8);
  LocalBandMap map(geometry, peak_depth, std::move(z_grid), std::move(p_grid), std::move(solver));

  const std::size_t nz = map.z_.size(), np = map.p_.size();
  bool symmetric = true;
  for (std::size_t i = 0; i < nz / 2; ++i) {
    if (map.z_[i] != -map.z_[nz - 1 - i]) {
      symmetric = false;
      break;
    }
  }
  const std::size_t first = symmetric ? nz / 2 : 0;
  parallel_for(nz - first, [&](std::size_t row) {
    const std::size_t iz = first + row;
    const double depth = map.depth_at(map.z_[iz]);
    for (std::size_t ip = 0; ip < np; ++ip) {
      const double p = map.p_[ip];
      const auto ck = map.solver_.complex_k(depth, p * p);
      map.im_[iz * np + ip] = ck.im_k;
      map.re_[iz * np + ip] = ck.re_k;
    }
  });
  if (symmetric) {
    for (std::size_t iz = 0; iz < first; ++iz) {
      const std::size_t mirror = nz - 1 - iz;
      std::copy_n(map.im_.begin() + mirror * np, np, map.im_.begin() + iz * np);
      std::copy_n(map.re_.begin() + mirror * np, np, map.re_.begin() + iz * np);
    }
  }
  return map;
}

LocalBandMap build_band_map(const LatticeGeometry& geometry, double peak_depth,
                            std::vector<double> p_grid) {
  return build_band_map(geometry, peak_depth, std::move(p_grid),
                        symmetric_grid(4.0 * geometry.waist_recoil(), kDefaultMapPoints));
}

namespace {

constexpr int kMaxRefinement = 50;

struct Simpson {
  const LocalBandMap& map;
  double energy;
  bool unresolved = false;

  double f(double z) const { return map.evaluate(z, energy).im_k; }

  double refine(double a, double b, double fa, double fm, double fb, double whole, double tol,
                int level) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (level >= kMaxRefinement) {
      unresolved = true;
      return left + right;
    }
    return refine(a, m, fa, flm, fm, left, 0.5 * tol, level + 1) +
           refine(m, b, fm, frm, fb, right, 0.5 * tol, level + 1);
  }

  double cell(double a, double b, double fa, double fb, double tol) {
    const double fm = f(0.5 * (a + b));
    if (fa == 0.0 && fb == 0.0 && fm == 0.0) return 0.0;
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return refine(a, b, fa, fm, fb, whole, tol, 0);
  }
};

}  // namespace

AxisSamples sample_half_axis(const LocalBandMap& map, double energy) {
  AxisSamples s{energy, map.half_axis(), {}};
  s.im_k.reserve(s.z.size());
  for (double z : s.z) s.im_k.push_back(map.evaluate(z, energy).im_k);
  return s;
}

namespace {

double integrate_nodes(const LocalBandMap& map, double energy, const std::vector<double>& nodes,
                       const std::vector<double>& values) {
  Simpson s{map, energy};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    if (values[i] == 0.0 && values[i + 1] == 0.0) continue;
    total += s.cell(nodes[i], nodes[i + 1], values[i], values[i + 1], 1e-10);
  }
  if (s.unresolved) {
    throw NumericalError("attenuation quadrature did not resolve a gap edge at E=" +
                         std::to_string(energy));
  }
  return total;
}

}  // namespace

double attenuation_integral(const LocalBandMap& map, const AxisSamples& samples) {
  return integrate_nodes(map, samples.energy, samples.z, samples.im_k);
}

double attenuation_integral(const LocalBandMap& map, double energy, double z_lo, double z_hi) {
  if (!(z_hi > z_lo)) return 0.0;
  std::vector<double> nodes{z_lo};
  for (double z : map.half_axis()) {
    if (z > z_lo && z < z_hi) nodes.push_back(z);
  }
  for (double z : map.z_grid()) {
    if (z < 0.0 && z > z_lo && z < z_hi) nodes.push_back(z);
  }
  nodes.push_back(z_hi);
  std::sort(nodes.begin(), nodes.end());

  std::vector<double> values(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) values[i] = map.evaluate(nodes[i], energy).im_k;
  return integrate_nodes(map, energy, nodes, values);
}

std::vector<Interval> gap_intervals(const LocalBandMap& map, double energy, double kappa_min,
                                    double edge_tolerance) {
  return gap_intervals(map, sample_half_axis(map, energy), kappa_min, edge_tolerance);
}

std::vector<Interval> gap_intervals(const LocalBandMap& map, const AxisSamples& samples,
                                    double kappa_min, double edge_tolerance) {
  const double energy = samples.energy;
  const auto& axis = samples.z;
  auto g = [&](double z) { return map.evaluate(z, energy).im_k - kappa_min; };
  auto bisect = [&](double a, double b, double ga) {
    while (b - a > edge_tolerance) {
      const double m = 0.5 * (a + b);
      const double gm = g(m);
      if ((gm > 0.0) == (ga > 0.0)) {
        a = m;
        ga = gm;
      } else {
        b = m;
      }
    }
    return 0.5 * (a + b);
  };

  std::vector<Interval> out;
  double prev = samples.im_k[0] - kappa_min;
  double open = prev > 0.0 ? 0.0 : std::nan("");
  for (std::size_t i = 1; i < axis.size(); ++i) {
    const double cur = samples.im_k[i] - kappa_min;
    if ((cur > 0.0) != (prev > 0.0)) {
      const double edge = bisect(axis[i - 1], axis[i], prev);
      if (cur > 0.0) {
        open = edge;
      } else {
        out.push_back({open, edge});
        open = std::nan("");
      }
    }
    prev = cur;
  }
  if (!std::isnan(open)) out.push_back({open, axis.back()});
  return out;
}

std::optional<CavityGeometry> find_cavity_at_energy(const LocalBandMap& map, double energy,
                                                    double kappa_min) {
  const auto gaps = gap_intervals(map, energy, kappa_min);
  if (gaps.empty() || gaps.front().lo == 0.0) return std::nullopt;
  const Interval mirror = gaps.front();
  CavityGeometry c;
  c.energy = energy;
  c.z_in_right = mirror.lo;
  c.z_in_left = -mirror.lo;
  c.z_out_right = mirror.hi;
  c.length = 2.0 * mirror.lo;
  c.gap_strength = attenuation_integral(map, energy, mirror.lo, mirror.hi);
  return c;
}

std::optional<CavityGeometry> find_cavity(const LocalBandMap& map, double p, double kappa_min) {
  const auto& pg = map.p_grid();
  const auto [lo, hi] = std::minmax_element(pg.begin(), pg.end());
  if (p < *lo || p > *hi) throw DomainError("momentum outside the band-map range");
  return find_cavity_at_energy(map, p * p, kappa_min);
}

AdiabaticFollow follow_band(double energy, double depth_before, double depth_after) {
  const int band = band_index(depth_before, energy);
  if (band == 0) {
    throw DomainError("energy " + std::to_string(energy) + " lies in a gap at depth " +
                      std::to_string(depth_before));
  }
  // E_n(q) is monotonic on [0, 1]: odd bands rise, even bands fall.
  double lo = 0.0, hi = 1.0;
  const double e_lo = band_energy(depth_before, band, 0.0);
  const double e_hi = band_energy(depth_before, band, 1.0);
  const bool rising = e_hi > e_lo;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double e = band_energy(depth_before, band, mid);
    if ((e < energy) == rising) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double q = 0.5 * (lo + hi);
  return {band, q, energy, band_energy(depth_after, band, q)};
}

}  // namespace finlat
