#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "fracbem/bem.hpp"
#include "fracbem/quadrature.hpp"

using namespace fracbem;
using cplx = std::complex<double>;

namespace {

const Vec3 kOblique2d{0.5, -0.5 * std::numbers::sqrt3, 0.0};

Mesh dust_mesh(int level, int n0 = 1) {
  Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, level);
  return mesh_per_component(p, n0);
}

Mesh cantor_mesh(int level, int n0 = 1) {
  Prefractal p = generate_prefractal(Family::cantor_set, Rational(1, 3), 0, level);
  return mesh_per_component(p, n0);
}

} // namespace

TEST_CASE("incident wave validation") {
  CHECK_NOTHROW(validate_wave({2.0, {0.0, 0.0, -1.0}}));
  CHECK_NOTHROW(validate_wave({30.0, kOblique2d}));
  CHECK_THROWS_AS(validate_wave({0.0, {0.0, 0.0, -1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_wave({-3.0, {0.0, 0.0, -1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_wave({1.0, {0.0, 0.0, -1.1}}), std::invalid_argument);
}

TEST_CASE("collocation entries come from the singular and regular quadratures") {
  Mesh m = dust_mesh(1);
  IncidentWave wave{5.0, {0.0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)}};
  LinearSystem sys = assemble_collocation(m, wave);
  REQUIRE(sys.matrix.rows() == 4);
  REQUIRE(sys.rhs.size() == 4);

  KernelSpec spec = KernelSpec::helmholtz(3, wave.k);
  cplx diag = diagonal_entry(spec, ElementKind::square, 1.0 / 3.0);
  for (int l = 0; l < 4; ++l) {
    // right-hand side: plane-wave trace at the node
    Vec2 c = m.elements[l].center;
    cplx want = std::exp(cplx(0.0, wave.k * (wave.direction.x * c.x + wave.direction.y * c.y)));
    CHECK(std::abs(sys.rhs(l) - want) < 1e-15);
    CHECK(std::abs(sys.matrix(l, l) - diag) < 1e-15);
    for (int q = 0; q < 4; ++q) {
      if (q == l) continue;
      Vec3 x{c.x, c.y, 0.0};
      cplx want_off = element_integral(spec, m.elements[q], x);
      CHECK(std::abs(sys.matrix(l, q) - want_off) < 1e-15);
    }
  }

  // a duplicated element places a node on a foreign closure
  Mesh bad = m;
  bad.elements.push_back(bad.elements.front());
  CHECK_THROWS_AS(assemble_collocation(bad, wave), std::runtime_error);
}

TEST_CASE("collocation on segment meshes uses the line kernel") {
  Mesh m = cantor_mesh(1);
  IncidentWave wave{10.0, kOblique2d};
  LinearSystem sys = assemble_collocation(m, wave);
  REQUIRE(sys.matrix.rows() == 2);
  KernelSpec spec = KernelSpec::helmholtz(2, wave.k);
  CHECK(std::abs(sys.matrix(0, 0) - diagonal_entry(spec, ElementKind::segment, 1.0 / 3.0)) < 1e-15);
  for (int l = 0; l < 2; ++l) {
    cplx want = std::exp(cplx(0.0, wave.k * wave.direction.x * m.elements[l].center.x));
    CHECK(std::abs(sys.rhs(l) - want) < 1e-15);
  }
  Vec3 x0{m.elements[0].center.x, 0.0, 0.0};
  CHECK(std::abs(sys.matrix(0, 1) - element_integral(spec, m.elements[1], x0)) < 1e-15);
}

TEST_CASE("Galerkin system is complex symmetric with exact entries") {
  Mesh m = cantor_mesh(2);
  IncidentWave wave{7.0, kOblique2d};
  LinearSystem sys = assemble_galerkin_2d(m, wave);
  REQUIRE(sys.matrix.rows() == 4);

  CHECK((sys.matrix - sys.matrix.transpose()).norm() == 0.0);

  KernelSpec spec = KernelSpec::helmholtz(2, wave.k);
  for (int l = 0; l < 4; ++l) {
    const auto& sl = std::get<SegmentCell>(m.elements[l].parts[0]);
    for (int c = 0; c < 4; ++c) {
      const auto& sc = std::get<SegmentCell>(m.elements[c].parts[0]);
      cplx want = segment_pair_integral(spec, sl.x0, sl.x1, sc.x0, sc.x1);
      CHECK(std::abs(sys.matrix(l, c) - want) < 1e-15);
    }
    // moment of e^{ik d.x}: closed-form antiderivative over the segment
    double kd = wave.k * wave.direction.x;
    cplx want_rhs = (std::exp(cplx(0.0, kd * sl.x1)) - std::exp(cplx(0.0, kd * sl.x0))) / cplx(0.0, kd);
    CHECK(std::abs(sys.rhs(l) - want_rhs) < 1e-15);
  }

  CHECK_THROWS_AS(assemble_galerkin_2d(dust_mesh(1), wave), std::invalid_argument);
}

TEST_CASE("dense solve") {
  LinearSystem one;
  one.matrix.resize(1, 1);
  one.rhs.resize(1);
  one.matrix(0, 0) = cplx(2.0, 1.0);
  one.rhs(0) = cplx(3.0, -1.0);
  SolveInfo info = solve(one);
  CHECK(std::abs(info.coefficients(0) - cplx(3.0, -1.0) / cplx(2.0, 1.0)) < 1e-15);
  CHECK(info.relative_residual < 1e-14);

  LinearSystem two;
  two.matrix = Eigen::MatrixXcd::Identity(2, 2);
  two.rhs = Eigen::VectorXcd::Ones(2);
  CHECK_THROWS_AS(solve(two, 1), std::invalid_argument);

  LinearSystem sing;
  sing.matrix = Eigen::MatrixXcd::Zero(2, 2);
  sing.matrix(0, 0) = 1.0;
  sing.rhs = Eigen::VectorXcd::Ones(2);
  CHECK_THROWS_AS(solve(sing), std::runtime_error);

  LinearSystem shape;
  shape.matrix = Eigen::MatrixXcd::Identity(2, 2);
  shape.rhs = Eigen::VectorXcd::Ones(3);
  CHECK_THROWS_AS(solve(shape), std::invalid_argument);
}

TEST_CASE("solve_density carries mesh and wavenumber") {
  Mesh m = dust_mesh(1);
  IncidentWave wave{5.0, {0.0, 0.0, -1.0}};
  Density d = solve_density(m, wave);
  REQUIRE(d.mesh);
  CHECK(d.mesh->size() == m.size());
  CHECK(d.k == 5.0);
  REQUIRE(d.coefficients.size() == 4);

  LinearSystem sys = assemble_collocation(m, wave);
  SolveInfo info = solve(sys);
  CHECK((d.coefficients - info.coefficients).norm() == 0.0);

  // symmetry of the screen and normal incidence make all coefficients equal
  for (int i = 1; i < 4; ++i)
    CHECK(std::abs(d.coefficients(i) - d.coefficients(0)) < 1e-12);

  Density g = solve_density(cantor_mesh(2), IncidentWave{7.0, kOblique2d},
                            DiscretizationMethod::galerkin);
  CHECK(g.coefficients.size() == 4);
  CHECK(g.k == 7.0);
}

TEST_CASE("binary system dump") {
  LinearSystem sys;
  sys.matrix.resize(2, 2);
  sys.matrix << cplx(1.0, 2.0), cplx(3.0, 4.0), cplx(5.0, 6.0), cplx(7.0, 8.0);
  sys.rhs.resize(2);
  sys.rhs << cplx(-1.0, 0.5), cplx(2.5, -3.0);

  const char* path = "bem_test_system.bin";
  write_system_binary(sys, path);

  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  CHECK(n == 2);
  std::vector<double> vals(2 * (4 + 2));
  in.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(vals.size() * sizeof(double)));
  CHECK(in.gcount() == static_cast<std::streamsize>(vals.size() * sizeof(double)));
  // row-major matrix then rhs, re/im interleaved
  CHECK(vals[0] == 1.0);
  CHECK(vals[1] == 2.0);
  CHECK(vals[2] == 3.0);
  CHECK(vals[5] == 6.0);
  CHECK(vals[8] == -1.0);
  CHECK(vals[11] == -3.0);
  in.close();
  std::remove(path);
}
