#include <cmath>
#include <vector>

#include "doctest.h"
#include "finlat/revival.hpp"

using namespace finlat;
using constants::pi;

namespace {

struct Trace {
  std::vector<double> t, v;
};

template <class F>
Trace sample(F f, double t_end, std::size_t n) {
  Trace tr;
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = t_end * static_cast<double>(i) / static_cast<double>(n);
    tr.t.push_back(t);
    tr.v.push_back(f(t));
  }
  return tr;
}

WavePacketState packet_at(const SpatialGrid& g, double z0, double sigma_p, double p) {
  return initial_gaussian({z0, sigma_p, p}, g);
}

}  // namespace

TEST_CASE("box-well revival law") {
  // 4 m L^2 / (pi hbar) for 87Rb in a 20 um box, evaluated by hand: 0.6970 s.
  const auto b = box_revival_times(20e-6, constants::rb87_mass);
  CHECK(b.t_rev == doctest::Approx(0.6970).epsilon(1e-3));
  CHECK(b.t_spec == doctest::Approx(b.t_rev / 2.0));
  CHECK(b.t_sym == doctest::Approx(b.t_rev / 8.0));
  CHECK(box_revival_times(40e-6, constants::rb87_mass).t_rev == doctest::Approx(4.0 * b.t_rev));
  CHECK_THROWS_AS(box_revival_times(0.0, 1.0), DomainError);
}

TEST_CASE("amplitude fidelity") {
  const auto g = SpatialGrid::periodic(-200.0, 200.0, 2048);
  const auto a = packet_at(g, -40.0, 0.1, 0.5);
  CHECK(amplitude_fidelity(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  auto phased = a;
  for (auto& x : phased.psi) x *= std::polar(1.0, 0.7);
  CHECK(amplitude_fidelity(a, phased) == doctest::Approx(1.0).epsilon(1e-14));
  const auto far = packet_at(g, 60.0, 0.1, 0.5);
  CHECK(amplitude_fidelity(a, far) < 1e-12);
  const auto other = packet_at(SpatialGrid::periodic(-200.0, 200.0, 1024), -40.0, 0.1, 0.5);
  CHECK_THROWS_AS(amplitude_fidelity(a, other), DomainError);
}

TEST_CASE("density overlap") {
  const auto g = SpatialGrid::periodic(-200.0, 200.0, 2048);
  const DensityProfile profile(g, {-150.0, 150.0}, 4.0 * pi);
  const auto left = packet_at(g, -60.0, 0.3, 1.0);
  const auto right = packet_at(g, 60.0, 0.3, -1.0);
  const auto dl = profile(left), dr = profile(right);
  CHECK(density_correlation(dl, dl) == doctest::Approx(1.0).epsilon(1e-14));
  // The profile bins are symmetric about the window centre.
  CHECK(density_correlation(dl, dr, true) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(density_correlation(dl, dr) < 1e-3);
  const std::vector<double> flat(dl.size(), 0.01);
  CHECK(density_correlation(dl, flat) == 0.0);
  // A broader copy in the same place overlaps only partly.
  const auto wide = profile(packet_at(g, -60.0, 0.1, 1.0));
  const double partial = density_correlation(dl, wide);
  CHECK(partial > 0.1);
  CHECK(partial < 0.9);
  CHECK_THROWS_AS(density_correlation(dl, std::vector<double>(3, 0.0)), DomainError);
}

TEST_CASE("density overlap stays in [0, 1]") {
  for (int k = 1; k < 40; ++k) {
    std::vector<double> a(25), b(25);
    for (int i = 0; i < 25; ++i) {
      a[i] = 1.0 + std::sin(0.37 * k * i);
      b[i] = 2.0 + std::cos(0.11 * k * i * i);
    }
    const double c = density_correlation(a, b);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    CHECK(density_correlation(a, b, true) <= 1.0);
  }
}

TEST_CASE("synthetic cos^2 trace revives at T") {
  const double T = 10.0;
  const auto tr = sample([&](double t) { return std::pow(std::cos(pi * t / T), 2); }, 15.0, 1500);
  const auto d = detect_revivals(tr.t, tr.v, kCollapseThreshold, kRevivalThreshold, 1.0);
  REQUIRE(d.collapse_time);
  // cos^2 drops below 0.2 at T acos(sqrt 0.2) / pi.
  CHECK(*d.collapse_time == doctest::Approx(T * std::acos(std::sqrt(0.2)) / pi).epsilon(2e-3));
  REQUIRE(d.t_rev);
  CHECK(*d.t_rev == doctest::Approx(T).epsilon(1e-12));
  CHECK(d.quality == doctest::Approx(1.0));
  CHECK(d.revival_times.size() == 1);
}

TEST_CASE("no revival is reported for a decaying trace") {
  const auto tr = sample([](double t) { return std::exp(-t); }, 10.0, 500);
  const auto d = detect_revivals(tr.t, tr.v);
  CHECK(d.collapse_time.has_value());
  CHECK_FALSE(d.t_rev.has_value());
  CHECK(d.revival_times.empty());
  const auto never = detect_revivals(tr.t, std::vector<double>(tr.t.size(), 0.9));
  CHECK_FALSE(never.collapse_time.has_value());
  CHECK_FALSE(never.t_rev.has_value());
}

TEST_CASE("revival peaks closer than the separation keep the higher one") {
  auto f = [](double t) {
    return 0.9 * std::exp(-std::pow(t - 10.0, 2)) + 0.7 * std::exp(-std::pow(t - 12.0, 2)) +
           0.8 * std::exp(-std::pow(t - 20.0, 2));
  };
  const auto tr = sample(f, 25.0, 2500);
  const auto d = detect_revivals(tr.t, tr.v, 0.2, 0.5, 5.0);
  REQUIRE(d.revival_times.size() == 2);
  CHECK(std::abs(d.revival_times[0] - 10.0) < 0.05);
  CHECK(std::abs(d.revival_times[1] - 20.0) < 0.05);
  const auto close = detect_revivals(tr.t, tr.v, 0.2, 0.5, 0.5);
  CHECK(close.revival_times.size() == 3);
}

TEST_CASE("detection is invariant under resampling") {
  // Peak structure bandwidth ~ 1/T; 4x oversampled and 40x oversampled.
  const double T = 7.3;
  auto f = [&](double t) { return std::exp(-t / 40.0) * std::pow(std::cos(pi * t / T), 2); };
  const auto coarse = sample(f, 3.5 * T, 14 * 4);
  const auto fine = sample(f, 3.5 * T, 14 * 40);
  const auto a = detect_revivals(coarse.t, coarse.v, 0.2, 0.5, 0.5 * T);
  const auto b = detect_revivals(fine.t, fine.v, 0.2, 0.5, 0.5 * T);
  REQUIRE(a.revival_times.size() == b.revival_times.size());
  for (std::size_t i = 0; i < a.revival_times.size(); ++i) {
    CHECK(std::abs(a.revival_times[i] - b.revival_times[i]) <= coarse.t[1]);
  }
}

TEST_CASE("round-trip envelope removes the bounce") {
  const double period = 2.0;
  const auto tr = sample([&](double t) { return std::pow(std::cos(pi * t / period), 2); }, 20.0,
                         2000);
  const auto env = round_trip_envelope(tr.t, tr.v, period);
  for (double e : env) CHECK(e == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("oscillation period and turning points") {
  const auto tr = sample([](double t) { return 30.0 * std::sin(2.0 * pi * t / 3.0); }, 30.0, 30000);
  const auto p = oscillation_period(tr.t, tr.v);
  REQUIRE(p);
  CHECK(*p == doctest::Approx(3.0).epsilon(1e-6));
  const auto l = turning_point_length(tr.t, tr.v, 0.0, 9.0);
  REQUIRE(l);
  CHECK(*l == doctest::Approx(60.0).epsilon(1e-6));
  CHECK_FALSE(oscillation_period(tr.t, std::vector<double>(tr.t.size(), 1.0)).has_value());
}

TEST_CASE("power-law and linear fits") {
  const std::vector<double> x{15, 25, 35, 50};
  std::vector<double> y2, y15, yl;
  for (double v : x) {
    y2.push_back(3.0 * v * v);
    y15.push_back(0.5 * std::pow(v, 1.5));
    yl.push_back(2.0 * v + 7.0);
  }
  const auto q = scaling_fit(x, y2);
  CHECK(q.exponent == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(q.prefactor == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(q.quadratic_prefactor == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(q.quadratic_rms_residual < 1e-12);
  CHECK(q.exponent_stderr < 1e-10);
  const auto s = scaling_fit(x, y15);
  CHECK(s.exponent == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(s.quadratic_rms_residual > 0.05);
  const auto lf = linear_fit(x, yl);
  CHECK(lf.slope == doctest::Approx(2.0));
  CHECK(lf.intercept == doctest::Approx(7.0));
  CHECK(lf.rms_relative_residual < 1e-12);
  CHECK_THROWS_AS(scaling_fit(std::vector<double>{1, 2, 3}, std::vector<double>{1, 4, 9}),
                  DomainError);
}

TEST_CASE("effective mass reduces to the bare mass without a lattice") {
  const auto geometry = lattice_from_period(390e-9, 50e-6);
  const auto map = build_band_map(geometry, 0.0, {1.3});
  const double energy = 1.3 * 1.3;
  const CavityGeometry cavity{energy, -150.0, 150.0, 180.0, 300.0, 0.0};
  const auto m = effective_mass_prediction(map, cavity, energy);
  CHECK(m.mass_ratio == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(m.t_rev == doctest::Approx(2.0 * 300.0 * 300.0 / pi).epsilon(1e-6));
  CHECK(m.excluded_fraction == 0.0);
  CHECK(m.reliable);
}

TEST_CASE("box oracle reproduces the revival law") {
  const auto geometry = lattice_from_period(390e-9, 50e-6);
  BoxOracleConfig c;
  c.length = 20e-6 * geometry.k_L;
  const auto r = run_box_oracle(c);
  REQUIRE(r.t_rev_measured);
  CHECK(*r.t_rev_measured == doctest::Approx(r.t_rev_predicted).epsilon(0.01));
  CHECK(r.specular_correlation >= 0.99);
  REQUIRE(r.t_sym_measured);
  CHECK(*r.t_sym_measured == doctest::Approx(r.t_rev_predicted / 8.0).epsilon(0.01));
  CHECK(r.fidelity_at_rev > 0.99);
  // SI conversion agrees with the law in seconds.
  const auto u = recoil_units(geometry, constants::rb87_mass);
  CHECK(r.t_rev_predicted * u.t_R ==
        doctest::Approx(box_revival_times(20e-6, constants::rb87_mass).t_rev).epsilon(1e-9));
}

TEST_CASE("small band-gap cavity: trapped packet oscillates across the cavity") {
  const auto geometry = lattice_from_period(390e-9, 15e-6);
  const auto u = recoil_units(geometry, constants::rb87_mass);
  ExperimentConfig c;
  c.geometry = geometry;
  c.packet = {-3.0 * geometry.waist_recoil(), 0.0325, 2.4};
  c.depth_before = 9.0;
  c.depth_after = 15.0;
  c.ramp_duration = 1e-3 / u.t_R;
  c.grid = experiment_grid(geometry, c.packet);
  c.t_final = 40e-3 / u.t_R;
  c.sample_interval = 0.1e-3 / u.t_R;
  const auto run = run_revival_experiment(c);
  const auto& rep = run.report;
  REQUIRE(run.experiment.cavity);
  REQUIRE(rep.round_trip);
  REQUIRE(rep.cavity_length_measured);
  // The packet is about as wide as this cavity, so <z> turns well inside it.
  CHECK(*rep.cavity_length_measured > 0.3 * run.experiment.cavity->length);
  CHECK(*rep.cavity_length_measured < 2.0 * run.experiment.cavity->z_out_right);
  CHECK(rep.trace.front().signal() == doctest::Approx(1.0));
  for (std::size_t i = 0; i < rep.trace.size(); ++i) {
    CHECK(rep.trace[i].amplitude >= 0.0);
    CHECK(rep.trace[i].amplitude <= 1.0);
    CHECK(rep.envelope[i] >= rep.trace[i].signal());
  }
  for (std::size_t i = 1; i < rep.detection.revival_times.size(); ++i) {
    CHECK(rep.detection.revival_times[i] > rep.detection.revival_times[i - 1]);
  }
}
