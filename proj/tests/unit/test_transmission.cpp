#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "finlat/transmission.hpp"

using namespace finlat;

namespace {
const LatticeGeometry kLattice50 = lattice_from_period(390e-9, 50e-6);
}

TEST_CASE("closed-form total transmission") {
  CHECK(total_transmission(1.0, true) == 1.0);
  CHECK(total_transmission(1.0, false) == 1.0);
  CHECK(total_transmission(0.5, true) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(total_transmission(0.5, false) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(total_transmission(0.0, true) == 0.0);
}

TEST_CASE("resummation: monotone, bounded below by single pass") {
  double last_cav = -1.0, last_single = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double tp = i / 1000.0;
    const double cav = total_transmission(tp, true);
    const double single = total_transmission(tp, false);
    CHECK(cav >= single - 1e-15);
    CHECK(cav >= last_cav);
    CHECK(single >= last_single);
    CHECK(cav <= 1.0);
    last_cav = cav;
    last_single = single;
  }
}

TEST_CASE("reflection series converges to the closed form") {
  for (double tp : {0.13, 0.2, 0.5, 0.9, 1.0}) {
    CHECK(std::abs(reflection_series(tp, 100) - tp / (2.0 - tp)) < 1e-12);
  }
  // geometric remainder T+^2 r^{2n} / (1 - r^2) for weak mirrors
  for (double tp : {0.01, 0.05}) {
    const double r2 = (1 - tp) * (1 - tp);
    for (int n : {10, 100, 1000}) {
      const double remainder = tp * tp * std::pow(r2, n) / (1 - r2);
      CHECK(tp / (2 - tp) - reflection_series(tp, n) == doctest::Approx(remainder).epsilon(1e-9));
    }
  }
  // a single mirror pair composed incoherently is the same resummation
  CHECK(compose_incoherent(0.37, 0.37) == doctest::Approx(0.37 / (2 - 0.37)).epsilon(1e-14));
}

TEST_CASE("half transmission through the 9 E_R lattice") {
  const auto map = build_band_map(kLattice50, 9.0, {1.3, 2.4, 3.0});
  // open channel
  CHECK(half_transmission(map, 3.0) == 1.0);
  // deep inside the first-gap lens
  const double tp = half_transmission(map, 1.3);
  CHECK(tp < 1e-3);
  CHECK(tp > 0.0);
  // exponent bookkeeping: T+ = exp(-2 integral)
  const double integral = attenuation_integral(map, 1.3 * 1.3, 0.0, map.half_axis().back());
  CHECK(tp == doctest::Approx(std::exp(-2.0 * integral)).epsilon(1e-14));
  CHECK(std::exp(-2.0 * std::log(10.0) / 2.0) == doctest::Approx(0.1).epsilon(1e-15));

  const auto point = transmission_at(map, 2.4);
  CHECK(point.center_in_band);
  CHECK(point.mirrors_per_side == 1);
  CHECK_FALSE(point.multi_gap);
  CHECK(point.t == doctest::Approx(point.t_plus / (2 - point.t_plus)).epsilon(1e-15));
  CHECK(point.t + point.reflection() == 1.0);
}

TEST_CASE("attenuation quadrature is insensitive to the z sampling") {
  const auto coarse = build_band_map(kLattice50, 9.0, {1.6}, symmetric_grid(4 * kLattice50.waist_recoil(), 513));
  const auto fine = build_band_map(kLattice50, 9.0, {1.6}, symmetric_grid(4 * kLattice50.waist_recoil(), 4097));
  const double a = attenuation_integral(coarse, 2.56, 0.0, 4 * 402.768);
  const double b = attenuation_integral(fine, 2.56, 0.0, 4 * 402.768);
  CHECK(a == doctest::Approx(b).epsilon(1e-6));
}

TEST_CASE("Gaussian momentum average") {
  const auto one = [](double) { return 1.0; };
  for (double p_in : {0.05, 1.0, 2.4}) {
    for (double s : {0.01, 0.0325, 0.2}) {
      CHECK(averaged_transmission(one, p_in, s).value == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  // symmetric kernel averages a linear function to its centre
  const auto linear = [](double p) { return 0.25 * p; };
  CHECK(averaged_transmission(linear, 2.0, 0.1).value == doctest::Approx(0.5).epsilon(1e-12));
  // delta limit
  const auto smooth = [](double p) { return 0.5 + 0.4 * std::sin(3 * p); };
  CHECK(averaged_transmission(smooth, 1.7, 1e-5).value == doctest::Approx(smooth(1.7)).epsilon(1e-8));
  // window clipped at p = 0
  const auto clipped = averaged_transmission(one, 0.05, 0.0325);
  CHECK(clipped.truncated);
  CHECK(clipped.converged);
  CHECK_FALSE(averaged_transmission(one, 2.4, 0.0325).truncated);
  CHECK_THROWS_AS(averaged_transmission(one, 1.0, 0.0), DomainError);
}

TEST_CASE("transmission curve: bounded, and averaging adds no new extrema") {
  std::vector<double> ps;
  for (int i = 0; i <= 22; ++i) ps.push_back(1.0 + 0.1 * i);
  const auto map = build_band_map(kLattice50, 9.0, ps);
  const auto curve = transmission_curve(map, ps, 0.0325);
  const TabulatedTransmission table(ps, curve.t_mono);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    CHECK(curve.t_mono[i] >= 0.0);
    CHECK(curve.t_mono[i] <= 1.0);
    CHECK(curve.t_ave[i] >= 0.0);
    CHECK(curve.t_ave[i] <= 1.0);
  }
  for (std::size_t i = 0; i < ps.size(); i += 4) {
    // the average lies within the range of T over its kernel window
    double lo = 1.0, hi = 0.0;
    for (double p = ps[i] - 5 * 0.0325; p <= ps[i] + 5 * 0.0325; p += 0.01) {
      const double t = transmission_at(map, p).t;
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    CHECK(curve.t_ave[i] >= lo - 1e-3);
    CHECK(curve.t_ave[i] <= hi + 1e-3);
  }
  // alternating windows: closed below ~1.7 p_R, open near 2.0, closed at 2.2, open above 2.6
  CHECK(curve.t_ave[2] < 0.05);   // 1.2
  CHECK(curve.t_ave[10] > 0.95);  // 2.0
  CHECK(curve.t_ave[12] < 0.3);   // 2.2
  CHECK(curve.t_ave[18] > 0.95);  // 2.8
}
