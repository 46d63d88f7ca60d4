#include "finlat/transmission.hpp"

#include <algorithm>
#include <cmath>

#include "finlat/parallel.hpp"

namespace finlat {

double half_transmission(const LocalBandMap& map, double p) {
  const auto axis = map.half_axis();
  const double z_max = axis.back();
  if (map.depth_at(z_max) > 1e-4 * std::max(map.peak_depth(), 1e-300) && map.peak_depth() > 0) {
    throw DomainError("band map must extend to where the local depth is below 1e-4 V0");
  }
  const double integral = attenuation_integral(map, p * p, 0.0, z_max);
  return std::exp(-2.0 * integral);
}

double total_transmission(double t_plus, bool center_in_band) {
  if (center_in_band) return t_plus / (2.0 - t_plus);
  return t_plus * t_plus;
}

double reflection_series(double t_plus, int terms) {
  const double r2 = (1.0 - t_plus) * (1.0 - t_plus);
  double sum = 0.0, term = 1.0;
  for (int n = 0; n < terms; ++n) {
    sum += term;
    term *= r2;
  }
  return t_plus * t_plus * sum;
}

double compose_incoherent(double t_a, double t_b) {
  const double denom = 1.0 - (1.0 - t_a) * (1.0 - t_b);
  if (denom <= 0.0) return 0.0;
  return t_a * t_b / denom;
}

TransmissionPoint transmission_at(const LocalBandMap& map, double p, double kappa_min) {
  const double energy = p * p;
  const auto samples = sample_half_axis(map, energy);
  TransmissionPoint out{};
  out.p = p;
  out.t_plus = std::exp(-2.0 * attenuation_integral(map, samples));
  out.center_in_band = samples.im_k.front() <= kappa_min;

  const auto gaps = gap_intervals(map, samples, kappa_min);
  const bool central = !gaps.empty() && gaps.front().lo == 0.0;
  out.mirrors_per_side = static_cast<int>(gaps.size()) - (central ? 1 : 0);
  out.multi_gap = out.mirrors_per_side > 1 || (central && out.mirrors_per_side > 0);

  if (!out.multi_gap) {
    out.t = total_transmission(out.t_plus, out.center_in_band);
    return out;
  }
  // Several gap pairs: compose every barrier on the line incoherently.
  std::vector<double> side;
  for (std::size_t i = central ? 1 : 0; i < gaps.size(); ++i) {
    side.push_back(std::exp(-2.0 * attenuation_integral(map, energy, gaps[i].lo, gaps[i].hi)));
  }
  double t = central
                 ? std::exp(-4.0 * attenuation_integral(map, energy, 0.0, gaps.front().hi))
                 : 1.0;
  for (double ti : side) t = compose_incoherent(compose_incoherent(ti, t), ti);
  out.t = t;
  return out;
}

namespace {

double trapezoid_average(const std::function<double(double)>& t_of_p, double p_in,
                         double sigma_p, int points, bool& truncated) {
  const double lo = std::max(0.0, p_in - 5.0 * sigma_p);
  const double hi = p_in + 5.0 * sigma_p;
  truncated = p_in - 5.0 * sigma_p < 0.0;
  const double h = (hi - lo) / (points - 1);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < points; ++i) {
    const double p = lo + h * i;
    const double x = (p - p_in) / sigma_p;
    const double w = ((i == 0 || i == points - 1) ? 0.5 : 1.0) * std::exp(-x * x);
    num += w * t_of_p(p);
    den += w;
  }
  return num / den;
}

}  // namespace

AveragedTransmission averaged_transmission(const std::function<double(double)>& t_of_p,
                                           double p_in, double sigma_p) {
  if (!(sigma_p > 0.0)) throw DomainError("sigma_p must be positive");
  bool truncated = false;
  int points = 257;
  double coarse = trapezoid_average(t_of_p, p_in, sigma_p, points, truncated);
  while (true) {
    const int finer = 2 * points - 1;
    const double fine = trapezoid_average(t_of_p, p_in, sigma_p, finer, truncated);
    const bool ok = std::abs(fine - coarse) <= 1e-6;
    if (ok || finer > 8193) return {std::clamp(fine, 0.0, 1.0), truncated, ok, finer};
    coarse = fine;
    points = finer;
  }
}

TabulatedTransmission::TabulatedTransmission(std::vector<double> p, std::vector<double> t)
    : p_(std::move(p)), t_(std::move(t)) {
  if (p_.size() != t_.size() || p_.empty()) throw DomainError("bad transmission table");
}

double TabulatedTransmission::operator()(double p) const {
  if (p <= p_.front()) return t_.front();
  if (p >= p_.back()) return t_.back();
  const auto it = std::upper_bound(p_.begin(), p_.end(), p);
  const std::size_t i = static_cast<std::size_t>(it - p_.begin());
  const double f = (p - p_[i - 1]) / (p_[i] - p_[i - 1]);
  return t_[i - 1] + f * (t_[i] - t_[i - 1]);
}

TransmissionCurve transmission_curve(const LocalBandMap& map, std::span<const double> p_in,
                                     double sigma_p, double table_step, double kappa_min) {
  if (p_in.empty()) throw DomainError("empty momentum grid");
  TransmissionCurve curve;
  curve.p_grid.assign(p_in.begin(), p_in.end());
  curve.sigma_p = sigma_p;
  curve.peak_depth = map.peak_depth();
  curve.w_z = map.geometry().w_z;

  const auto [mn, mx] = std::minmax_element(p_in.begin(), p_in.end());
  const double lo = std::max(table_step, *mn - 5.5 * sigma_p);
  const double hi = *mx + 5.5 * sigma_p;
  const int n_table = static_cast<int>(std::ceil((hi - lo) / table_step)) + 1;
  std::vector<double> tp(static_cast<std::size_t>(n_table)), tt(tp.size());
  for (int i = 0; i < n_table; ++i) tp[i] = lo + (hi - lo) * i / (n_table - 1);
  parallel_for(tp.size(), [&](std::size_t i) { tt[i] = transmission_at(map, tp[i], kappa_min).t; });
  const TabulatedTransmission table(tp, tt);

  curve.t_mono.resize(p_in.size());
  curve.t_ave.resize(p_in.size());
  curve.multi_gap.resize(p_in.size());
  std::vector<char> multi(p_in.size());
  parallel_for(p_in.size(), [&](std::size_t i) {
    const auto point = transmission_at(map, p_in[i], kappa_min);
    curve.t_mono[i] = point.t;
    multi[i] = point.multi_gap;
  });
  for (std::size_t i = 0; i < p_in.size(); ++i) {
    curve.multi_gap[i] = multi[i] != 0;
    const auto ave = averaged_transmission(table, p_in[i], sigma_p);
    curve.t_ave[i] = ave.value;
    if (ave.truncated) ++curve.truncated_points;
  }
  return curve;
}

}  // namespace finlat
