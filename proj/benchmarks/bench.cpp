#include <benchmark/benchmark.h>

#include <complex>
#include <memory>
#include <random>

#include "fracbem/bem.hpp"
#include "fracbem/fields.hpp"
#include "fracbem/norms.hpp"
#include "fracbem/quadrature.hpp"

using namespace fracbem;

namespace {

void BM_CylinderPair(benchmark::State& state) {
  double x = 0.1;
  for (auto _ : state) {
    auto [j0, y0] = bessel_j0_y0(x);
    benchmark::DoNotOptimize(j0 + y0);
    x += 1e-3;
    if (x > 80) x = 0.1;
  }
}
BENCHMARK(BM_CylinderPair);

void BM_Kernel2D(benchmark::State& state) {
  KernelSpec spec = KernelSpec::helmholtz(2, 30.0);
  double r = 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_kernel(spec, r));
    r += 1e-5;
    if (r > 2) r = 1e-3;
  }
}
BENCHMARK(BM_Kernel2D);

void BM_Kernel3D(benchmark::State& state) {
  KernelSpec spec = KernelSpec::helmholtz(3, 30.0);
  double r = 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_kernel(spec, r));
    r += 1e-5;
    if (r > 2) r = 1e-3;
  }
}
BENCHMARK(BM_Kernel3D);

void BM_GaussRule(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const QuadratureRule& g = gauss_legendre(n);
    benchmark::DoNotOptimize(g.nodes.data());
  }
}
BENCHMARK(BM_GaussRule)->Arg(8)->Arg(32)->Arg(64);

void BM_DiagonalEntry(benchmark::State& state) {
  KernelSpec spec = KernelSpec::helmholtz(3, 20.0);
  double size = 0.05;
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagonal_entry(spec, ElementKind::square, size));
    benchmark::DoNotOptimize(diagonal_entry(spec, ElementKind::triangle, size));
  }
}
BENCHMARK(BM_DiagonalEntry);

void BM_SegmentPairIntegral(benchmark::State& state) {
  KernelSpec spec = KernelSpec::helmholtz(2, 30.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(segment_pair_integral(spec, 0.0, 0.1, 0.15, 0.3));
}
BENCHMARK(BM_SegmentPairIntegral);

void BM_CollocationAssembly(benchmark::State& state) {
  Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0,
                                     static_cast<int>(state.range(0)));
  Mesh m = mesh_per_component(p, 1);
  IncidentWave wave{10.0, {0.0, 0.0, -1.0}};
  for (auto _ : state) {
    LinearSystem sys = assemble_collocation(m, wave);
    benchmark::DoNotOptimize(sys.matrix.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(m.size() * m.size()));
}
BENCHMARK(BM_CollocationAssembly)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_GalerkinAssembly(benchmark::State& state) {
  Prefractal p = generate_prefractal(Family::cantor_set, Rational(1, 3), 0,
                                     static_cast<int>(state.range(0)));
  Mesh m = mesh_per_component(p, 1);
  IncidentWave wave{30.0, {0.5, -0.866025403784438647, 0.0}};
  for (auto _ : state) {
    LinearSystem sys = assemble_galerkin_2d(m, wave);
    benchmark::DoNotOptimize(sys.matrix.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(m.size() * m.size()));
}
BENCHMARK(BM_GalerkinAssembly)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_DenseSolve(benchmark::State& state) {
  Eigen::Index n = state.range(0);
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  LinearSystem sys;
  sys.matrix = Eigen::MatrixXcd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      sys.matrix(i, j) += 0.1 * std::complex<double>(nd(rng), nd(rng));
  sys.rhs = Eigen::VectorXcd::Ones(n);
  for (auto _ : state) {
    SolveInfo info = solve(sys);
    benchmark::DoNotOptimize(info.coefficients.data());
  }
}
BENCHMARK(BM_DenseSolve)->Arg(64)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_FarField(benchmark::State& state) {
  Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, 2);
  Density d{std::make_shared<Mesh>(mesh_per_component(p, 1)),
            Eigen::VectorXcd::Ones(16), 20.0};
  DirectionSet dirs = sphere_directions(16, 32);
  for (auto _ : state) {
    auto ff = far_field(d, dirs);
    benchmark::DoNotOptimize(ff.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(dirs.directions.size()));
}
BENCHMARK(BM_FarField)->Unit(benchmark::kMillisecond);

void BM_EnergyNorm(benchmark::State& state) {
  Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, 2);
  auto m = std::make_shared<Mesh>(mesh_per_component(p, 4));
  Density d{m, Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(m->size())), 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(energy_norm(d, 1.0));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(m->size() * m->size()));
}
BENCHMARK(BM_EnergyNorm)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
