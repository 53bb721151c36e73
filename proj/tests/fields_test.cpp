#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fracbem/fields.hpp"

using namespace fracbem;
using cplx = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

Density unit_square_density(double k) {
  Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, 0);
  Density d;
  d.mesh = std::make_shared<Mesh>(mesh_per_component(p, 1));
  d.coefficients = Eigen::VectorXcd::Ones(1);
  d.k = k;
  return d;
}

// int_0^1 e^{-i t y} dy
cplx interval_phase_moment(double t) {
  if (std::fabs(t) < 1e-12) return 1.0;
  return (1.0 - std::exp(cplx(0.0, -t))) / cplx(0.0, t);
}

} // namespace

TEST_CASE("2D near-field box samples midpoints off the screen line") {
  FieldGrid g = near_field_box_2d(4);
  CHECK(g.ambient == 2);
  REQUIRE(g.points.size() == 16);
  REQUIRE(g.faces.size() == 1);
  CHECK(g.faces[0].nx == 4);
  CHECK(g.faces[0].ny == 4);
  double area = 0;
  for (double w : g.weights) area += w;
  CHECK(area == doctest::Approx(9.0).epsilon(1e-13));
  CHECK(g.points[0].x == doctest::Approx(-0.625).epsilon(1e-14));
  CHECK(g.points[0].y == doctest::Approx(-1.125).epsilon(1e-14));
  for (const Vec3& p : g.points) {
    CHECK(p.z == 0.0);
    CHECK(std::fabs(p.y) > 0.05);  // even n keeps rows off y = 0
    CHECK(p.x > -1.0);
    CHECK(p.x < 2.0);
  }
  CHECK_THROWS_AS(near_field_box_2d(1), std::invalid_argument);
}

TEST_CASE("3D near-field faces cover three box sides") {
  FieldGrid g = near_field_faces_3d(2);
  CHECK(g.ambient == 3);
  REQUIRE(g.points.size() == 12);
  REQUIRE(g.faces.size() == 3);
  CHECK(g.faces[0].label == "x=-1");
  CHECK(g.faces[1].label == "y=2");
  CHECK(g.faces[2].label == "z=-1");
  CHECK(g.faces[1].offset == 4);
  double area = 0;
  for (double w : g.weights) area += w;
  CHECK(area == doctest::Approx(21.0).epsilon(1e-13));
  for (std::size_t i = 0; i < 4; ++i) CHECK(g.points[i].x == -1.0);
  for (std::size_t i = 4; i < 8; ++i) CHECK(g.points[i].y == 2.0);
  for (std::size_t i = 8; i < 12; ++i) CHECK(g.points[i].z == -1.0);
}

TEST_CASE("circle directions integrate periodic modes exactly") {
  DirectionSet d = circle_directions(16);
  CHECK(d.ambient == 2);
  REQUIRE(d.directions.size() == 16);
  double total = 0, cos2 = 0;
  for (std::size_t i = 0; i < d.directions.size(); ++i) {
    total += d.weights[i];
    cos2 += d.weights[i] * d.directions[i].x * d.directions[i].x;
    CHECK(d.directions[i].x == doctest::Approx(std::cos(d.theta[i])).epsilon(1e-14));
    CHECK(d.directions[i].y == doctest::Approx(std::sin(d.theta[i])).epsilon(1e-14));
    CHECK(d.directions[i].z == 0.0);
  }
  CHECK(total == doctest::Approx(2.0 * kPi).epsilon(1e-13));
  CHECK(cos2 == doctest::Approx(kPi).epsilon(1e-13));
  CHECK(d.theta[3] == doctest::Approx(2.0 * kPi * 3.0 / 16.0).epsilon(1e-14));
  CHECK_THROWS_AS(circle_directions(3), std::invalid_argument);
}

TEST_CASE("sphere directions integrate polynomials in cos(theta) exactly") {
  DirectionSet d = sphere_directions(8, 16);
  CHECK(d.ambient == 3);
  REQUIRE(d.directions.size() == 128);
  double total = 0, z2 = 0;
  for (std::size_t i = 0; i < d.directions.size(); ++i) {
    total += d.weights[i];
    z2 += d.weights[i] * d.directions[i].z * d.directions[i].z;
    CHECK(norm(d.directions[i]) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(total == doctest::Approx(4.0 * kPi).epsilon(1e-12));
  CHECK(z2 == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(sphere_directions(1, 16), std::invalid_argument);
}

TEST_CASE("scattered field evaluation and screen-closure guard") {
  Prefractal p = generate_prefractal(Family::cantor_set, Rational(1, 3), 0, 1);
  Mesh m = mesh_per_component(p, 1);
  IncidentWave wave{4.0, {0.5, -0.5 * std::numbers::sqrt3, 0.0}};
  Density d = solve_density(m, wave, DiscretizationMethod::galerkin);

  std::vector<Vec3> pts = {{0.5, 0.8, 0.0}, {-0.3, -0.4, 0.0}};
  auto u = eval_scattered(d, pts);
  REQUIRE(u.size() == 2);
  CHECK(std::abs(u[0]) > 0.0);

  auto tot = eval_total(d, wave, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cplx inc = std::exp(cplx(0.0, wave.k * (wave.direction.x * pts[i].x + wave.direction.y * pts[i].y)));
    CHECK(std::abs(tot[i] - (u[i] + inc)) < 1e-14);
  }

  CHECK_THROWS_AS(eval_scattered(d, {{0.1, 0.0, 0.0}}), std::invalid_argument);
  CHECK_NOTHROW(eval_scattered(d, {{0.5, 0.0, 0.0}}));  // inside the removed gap

  FieldGrid grid = near_field_box_2d(6);
  eval_scattered(d, grid);
  REQUIRE(grid.values.size() == grid.points.size());
  auto direct = eval_scattered(d, grid.points);
  for (std::size_t i = 0; i < direct.size(); ++i)
    CHECK(std::abs(grid.values[i] - direct[i]) < 1e-15);

  Density broken = d;
  broken.coefficients = Eigen::VectorXcd::Ones(5);
  CHECK_THROWS_AS(eval_scattered(broken, pts), std::invalid_argument);
}

TEST_CASE("far field of a hand-set density matches the plane-wave moment product") {
  double k = 2.0;
  Density d = unit_square_density(k);
  DirectionSet dirs = sphere_directions(4, 8);
  auto ff = far_field(d, dirs);
  REQUIRE(ff.size() == dirs.directions.size());
  for (std::size_t i = 0; i < ff.size(); ++i) {
    const Vec3& xh = dirs.directions[i];
    cplx want = -1.0 / (4.0 * kPi) * interval_phase_moment(k * xh.x) * interval_phase_moment(k * xh.y);
    CHECK(std::abs(ff[i] - want) < 1e-12);
  }

  DirectionSet mismatched = circle_directions(8);
  CHECK_THROWS_AS(far_field(d, mismatched), std::invalid_argument);
}

TEST_CASE("far field predicts the distant near field in 2D") {
  Prefractal p = generate_prefractal(Family::cantor_set, Rational(1, 3), 0, 2);
  Mesh m = mesh_per_component(p, 1);
  IncidentWave wave{1.0, {0.5, -0.5 * std::numbers::sqrt3, 0.0}};
  Density d = solve_density(m, wave, DiscretizationMethod::galerkin);

  DirectionSet dirs = circle_directions(8);
  auto ff = far_field(d, dirs);
  double peak = 0;
  for (const cplx& v : ff) peak = std::max(peak, std::abs(v));
  REQUIRE(peak > 0.0);

  double r = 200.0;
  std::vector<Vec3> pts;
  for (const Vec3& xh : dirs.directions) pts.push_back({r * xh.x, r * xh.y, 0.0});
  auto u = eval_scattered(d, pts);
  double phase_r = std::sqrt(r);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cplx pred = std::exp(cplx(0.0, wave.k * r)) / phase_r * ff[i];
    double denom = std::max(std::abs(pred), 0.1 * peak / phase_r);
    CHECK(std::abs(u[i] - pred) / denom < 1e-2);
  }
}

TEST_CASE("far field predicts the distant near field in 3D") {
  Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, 1);
  Mesh m = mesh_per_component(p, 4);
  IncidentWave wave{2.0, {0.0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)}};
  Density d = solve_density(m, wave);

  DirectionSet dirs = sphere_directions(4, 8);
  auto ff = far_field(d, dirs);
  double peak = 0;
  for (const cplx& v : ff) peak = std::max(peak, std::abs(v));

  double r = 200.0;
  std::vector<Vec3> pts;
  for (const Vec3& xh : dirs.directions) pts.push_back({r * xh.x, r * xh.y, r * xh.z});
  auto u = eval_scattered(d, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cplx pred = std::exp(cplx(0.0, wave.k * r)) / r * ff[i];
    double denom = std::max(std::abs(pred), 0.1 * peak / r);
    CHECK(std::abs(u[i] - pred) / denom < 1e-2);
  }
}

TEST_CASE("far-field reciprocity for the symmetric discretization") {
  Prefractal p = generate_prefractal(Family::cantor_set, Rational(1, 3), 0, 3);
  Mesh m = mesh_per_component(p, 1);
  double k = 12.0;

  double a = 0.3;
  Vec3 xhat{std::cos(a), std::sin(a), 0.0};
  Vec3 inc{0.5, -0.5 * std::numbers::sqrt3, 0.0};

  auto one_dir = [](const Vec3& v) {
    DirectionSet s;
    s.ambient = 2;
    s.directions = {v};
    s.weights = {1.0};
    s.theta = {std::atan2(v.y, v.x)};
    return s;
  };

  Density d1 = solve_density(m, IncidentWave{k, inc}, DiscretizationMethod::galerkin);
  cplx u1 = far_field(d1, one_dir(xhat))[0];
  Density d2 = solve_density(m, IncidentWave{k, {-xhat.x, -xhat.y, 0.0}},
                             DiscretizationMethod::galerkin);
  cplx u2 = far_field(d2, one_dir({-inc.x, -inc.y, 0.0}))[0];
  CHECK(std::abs(u1 - u2) / std::abs(u1) < 1e-12);
}

TEST_CASE("field and far-field exports") {
  Prefractal p = generate_prefractal(Family::cantor_set, Rational(1, 3), 0, 1);
  Mesh m = mesh_per_component(p, 1);
  IncidentWave wave{4.0, {0.5, -0.5 * std::numbers::sqrt3, 0.0}};
  Density d = solve_density(m, wave, DiscretizationMethod::galerkin);

  FieldGrid grid = near_field_box_2d(4);
  CHECK_THROWS_AS(write_field_csv("fields_test_field.csv", grid), std::invalid_argument);
  eval_scattered(d, grid);
  write_field_csv("fields_test_field.csv", grid);
  {
    std::ifstream in("fields_test_field.csv");
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,y,z,re,im");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 16);
  }
  std::remove("fields_test_field.csv");

  write_field_pgm("fields_test_field", grid);
  {
    std::ifstream in("fields_test_field.pgm");
    REQUIRE(in.good());
    std::string magic;
    std::getline(in, magic);
    CHECK(magic == "P2");
    std::string comment, dims, maxval;
    std::getline(in, comment);
    std::getline(in, dims);
    std::getline(in, maxval);
    CHECK(dims == "4 4");
    CHECK(maxval == "255");
  }
  std::remove("fields_test_field.pgm");

  DirectionSet dirs = circle_directions(8);
  auto ff = far_field(d, dirs);
  write_far_csv("fields_test_far.csv", dirs, ff);
  {
    std::ifstream in("fields_test_far.csv");
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "theta,re,im,abs");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 8);
  }
  std::remove("fields_test_far.csv");
}
