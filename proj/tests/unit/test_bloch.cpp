#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "finlat/bloch.hpp"

using namespace finlat;
using constants::pi;

TEST_CASE("free particle in the reduced zone") {
  const auto e = diagonalize_bloch(0.0, 0.5, 4);
  CHECK(e[0] == doctest::Approx(0.25).epsilon(1e-12));
  // folded free dispersion (k + 2j)^2
  std::vector<double> folded;
  for (int j = -3; j <= 3; ++j) folded.push_back((0.5 + 2 * j) * (0.5 + 2 * j));
  std::sort(folded.begin(), folded.end());
  for (int n = 0; n < 4; ++n) CHECK(std::abs(e[n] - folded[n]) < 1e-10);
}

TEST_CASE("basis size preconditions") {
  CHECK_THROWS_AS(diagonalize_bloch(9.0, 0.0, 3, 10), DomainError);
  CHECK_THROWS_AS(diagonalize_bloch(9.0, 0.0, 3, 9), DomainError);
  CHECK_NOTHROW(diagonalize_bloch(9.0, 0.0, 3, 11));
}

TEST_CASE("bands are ordered and monotonic within the reduced zone") {
  std::vector<double> ks;
  for (int i = 0; i <= 50; ++i) ks.push_back(i / 50.0);
  for (double depth : {3.0, 9.0, 15.0}) {
    const auto bands = compute_bands(depth, ks, 5);
    for (int n = 0; n < 5; ++n) {
      const double sign = (n % 2 == 0) ? 1.0 : -1.0;  // odd bands rise, even bands fall
      for (std::size_t i = 1; i < ks.size(); ++i) {
        CHECK(sign * (bands.energies[n][i] - bands.energies[n][i - 1]) >= -1e-12);
        if (n + 1 < 5) CHECK(bands.energies[n][i] <= bands.energies[n + 1][i]);
      }
    }
  }
}

TEST_CASE("shallow lattice: first gap approaches V0/2") {
  for (double v0 : {0.1, 0.01}) {
    const auto edge = diagonalize_bloch(v0, 1.0, 2);
    const double gap = edge[1] - edge[0];
    CHECK(gap == doctest::Approx(v0 / 2).epsilon(0.05));
  }
}

TEST_CASE("monodromy at zero depth matches the free trace cos(pi sqrt(E))") {
  const MonodromySolver solver(2048);
  for (double e : {0.3, 1.7, 4.2, 10.0}) {
    CHECK(solver.half_trace(0.0, e) == doctest::Approx(std::cos(pi * std::sqrt(e))).epsilon(1e-9));
    CHECK(solver.complex_k(0.0, e).im_k == 0.0);
  }
}

TEST_CASE("monodromy determinant stays one") {
  const MonodromySolver solver = MonodromySolver::calibrated(30.0, 20.0);
  for (double depth : {0.0, 3.0, 9.0, 15.0, 30.0}) {
    for (double e = -depth; e <= 20.0; e += 0.37) {
      const auto m = solver.monodromy(depth, e);
      const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
      const double scale = std::max(1.0, std::abs(m[0][0] * m[1][1]));
      CHECK(std::abs(det - 1.0) < 1e-10 * scale);
      // symmetric half-cell route gives the same trace
      const double d_full = 0.5 * (m[0][0] + m[1][1]);
      const double d_half = solver.half_trace(depth, e);
      CHECK(std::abs(d_full - d_half) < 1e-9 * std::max(1.0, std::abs(d_full)));
    }
  }
}

TEST_CASE("first gap at 9 E_R sits at the zone edge with positive attenuation") {
  const auto edge = diagonalize_bloch(9.0, 1.0, 2);
  const double centre = 0.5 * (edge[0] + edge[1]);
  const MonodromySolver solver = MonodromySolver::calibrated(9.0, 20.0);
  const auto ck = solver.complex_k(9.0, centre);
  CHECK(ck.im_k > 0.1);
  CHECK(ck.re_k == 1.0);
  // second gap is at the zone centre
  const auto c = diagonalize_bloch(9.0, 0.0, 3);
  const auto ck2 = solver.complex_k(9.0, 0.5 * (c[1] + c[2]));
  CHECK(ck2.im_k > 0.0);
  CHECK(ck2.re_k == 0.0);
}

TEST_CASE("band edges: plane-wave and monodromy routes agree") {
  const MonodromySolver solver = MonodromySolver::calibrated(15.0, 20.0);
  for (double depth : {0.0, 3.0, 9.0, 15.0}) {
    const auto pw = allowed_bands_planewave(depth, 4);
    const auto mono = solver.allowed_bands(depth, 4);
    for (int n = 0; n < 4; ++n) {
      CHECK(std::abs(pw[n].lo - mono[n].lo) < 1e-6);
      CHECK(std::abs(pw[n].hi - mono[n].hi) < 1e-6);
      // at an edge the half trace is +-1 and the attenuation vanishes
      const double d = solver.half_trace(depth, mono[n].lo);
      CHECK(std::abs(std::abs(d) - 1.0) < 1e-9);
      CHECK(solver.complex_k(depth, mono[n].hi).im_k < 1e-4);
    }
  }
}

TEST_CASE("attenuation inside a gap has a single interior maximum") {
  const MonodromySolver solver = MonodromySolver::calibrated(15.0, 20.0);
  for (double depth : {3.0, 9.0, 15.0}) {
    const auto bands = solver.allowed_bands(depth, 4);
    for (int g = 0; g < 3; ++g) {
      const double lo = bands[g].hi, hi = bands[g + 1].lo;
      std::vector<double> im;
      for (int i = 1; i < 200; ++i) im.push_back(solver.complex_k(depth, lo + (hi - lo) * i / 200).im_k);
      CHECK(*std::min_element(im.begin(), im.end()) > 0.0);
      const auto peak = std::max_element(im.begin(), im.end()) - im.begin();
      for (long i = 1; i <= peak; ++i) CHECK(im[i] >= im[i - 1]);
      for (std::size_t i = peak + 1; i < im.size(); ++i) CHECK(im[i] <= im[i - 1]);
      // real part alternates: odd gaps at the zone edge, even gaps at the centre
      CHECK(solver.complex_k(depth, 0.5 * (lo + hi)).re_k == ((g % 2 == 0) ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("gap widths grow with depth") {
  double last = 0.0;
  for (double depth : {1.0, 3.0, 9.0, 15.0}) {
    const auto b = allowed_bands_planewave(depth, 2);
    CHECK(b[1].lo - b[0].hi > last);
    last = b[1].lo - b[0].hi;
  }
}

TEST_CASE("effective mass") {
  CHECK(effective_mass(0.0, 1, 0.3) == doctest::Approx(1.0).epsilon(1e-6));

  // deep lattice: tight-binding band E = E0 - 2J cos(pi k) gives m*/m = 4 / (pi^2 W)
  const auto b = allowed_bands_planewave(15.0, 1);
  const double tb = 4.0 / (pi * pi * b[0].width());
  const double ms = effective_mass(15.0, 1, 0.0);
  CHECK(ms > 10.0);
  CHECK(ms == doctest::Approx(tb).epsilon(0.1));

  CHECK(effective_mass(9.0, 1, 0.95) < 0.0);
  CHECK(effective_mass(0.0, 1, 0.95) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("group velocity") {
  for (double k : {0.1, 0.4, 0.8}) CHECK(group_velocity(0.0, 1, k) == doctest::Approx(k).epsilon(1e-8));
  for (double depth : {0.0, 3.0, 9.0}) {
    for (int band : {1, 2, 3}) {
      CHECK(std::abs(group_velocity(depth, band, 0.0)) < 1e-8);
      CHECK(std::abs(group_velocity(depth, band, 1.0)) < 1e-8);
    }
  }
  // band III rises from k=0 to k=k_L
  const double v = group_velocity(9.0, 3, 0.5);
  CHECK(v > 0.0);
  CHECK(std::isfinite(v));
}

TEST_CASE("band index lookup") {
  const auto bands = allowed_bands_planewave(9.0, 4);
  CHECK(band_index(9.0, 0.5 * (bands[2].lo + bands[2].hi)) == 3);
  CHECK(band_index(9.0, 0.5 * (bands[0].hi + bands[1].lo)) == 0);
  CHECK(band_index(9.0, -20.0) == 0);
}
