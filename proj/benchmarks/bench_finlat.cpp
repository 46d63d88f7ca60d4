#include <benchmark/benchmark.h>

#include <vector>

#include "finlat/bloch.hpp"
#include "finlat/local_bands.hpp"
#include "finlat/propagator.hpp"
#include "finlat/transmission.hpp"
#include "finlat/units.hpp"

namespace {

using namespace finlat;

void BM_HalfTrace(benchmark::State& state) {
  const MonodromySolver solver(static_cast<int>(state.range(0)));
  double e = 3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solver.half_trace(15.0, e));
    e = e < 6.0 ? e + 1e-3 : 3.0;
  }
}
BENCHMARK(BM_HalfTrace)->Arg(512)->Arg(1024)->Arg(4096);

void BM_PlaneWaveBands(benchmark::State& state) {
  double k = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagonalize_bloch(15.0, k, 8));
    k = k < 1.0 ? k + 0.01 : 0.0;
  }
}
BENCHMARK(BM_PlaneWaveBands);

void BM_BandMap(benchmark::State& state) {
  const auto g = lattice_from_period(390e-9, 50e-6);
  const std::vector<double> p{2.4};
  const auto z = symmetric_grid(4.0 * g.waist_recoil(), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_band_map(g, 15.0, p, z));
}
BENCHMARK(BM_BandMap)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_TransmissionCurve(benchmark::State& state) {
  const auto g = lattice_from_period(390e-9, 50e-6);
  const auto map = build_band_map(g, 9.0, {1.0});
  std::vector<double> p;
  for (int i = 0; i < 23; ++i) p.push_back(1.0 + 0.1 * i);
  for (auto _ : state) benchmark::DoNotOptimize(transmission_curve(map, p, 0.0325));
}
BENCHMARK(BM_TransmissionCurve)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_SplitStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const double half = n * constants::pi / 16.0;
  const auto grid = SpatialGrid::periodic(-half, half, n);
  SplitOperator prop(grid, lattice_shape(grid, 402.77), 0.05);
  auto psi = initial_gaussian({-0.3 * half, 0.0325, 2.4}, grid);
  for (auto _ : state) prop.step(psi, 15.0);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_SplitStep)->Arg(4096)->Arg(16384)->Arg(65536);

}  // namespace

BENCHMARK_MAIN();
