#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "fracbem/norms.hpp"
#include "fracbem/quadrature.hpp"

using namespace fracbem;
using cplx = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

double quadratic_form(const Density& d, double kappa) {
  double n = energy_norm(d, kappa);
  return 0.5 * n * n;  // c^H B c
}

// brute pair integral of e^{-kappa r}/(4 pi r) over two lattice triangles,
// Duffy-free tensor Gauss (valid for separated cells)
double brute_tri_pair(Vec2 a, Vec2 b, Vec2 anch1, int o1, Vec2 anch2, int o2,
                      double kappa, int q) {
  const QuadratureRule& g = gauss_legendre(q);
  double jac = a.x * b.y - a.y * b.x;
  auto make = [&](Vec2 anchor, int orient, std::vector<Vec2>& p, std::vector<double>& w) {
    double s = orient == 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      for (std::size_t j = 0; j < g.nodes.size(); ++j) {
        double u = 0.5 * (g.nodes[i].x + 1), v = 0.5 * (g.nodes[j].x + 1);
        double ux = u * (1 - v), uy = u * v;
        p.push_back(Vec2{anchor.x + s * (ux * a.x + uy * b.x), anchor.y + s * (ux * a.y + uy * b.y)});
        w.push_back(0.25 * g.weights[i] * g.weights[j] * u * jac);
      }
  };
  std::vector<Vec2> p1, p2;
  std::vector<double> w1, w2;
  make(anch1, o1, p1, w1);
  make(anch2, o2, p2, w2);
  double tot = 0;
  for (std::size_t i = 0; i < p1.size(); ++i)
    for (std::size_t j = 0; j < p2.size(); ++j) {
      double r = std::hypot(p1[i].x - p2[j].x, p1[i].y - p2[j].y);
      tot += w1[i] * w2[j] * std::exp(-kappa * r) / (4 * kPi * r);
    }
  return tot;
}

} // namespace

TEST_CASE("energy norm of a short segment matches its Fourier representation") {
  // indicator of [0, 0.1]; kappa = 1 kernel has line symbol 1/(2 sqrt(1 + xi^2))
  Prefractal p = generate_prefractal(Family::cantor_set, Rational(1, 3), 0, 0);
  auto m = std::make_shared<Mesh>(mesh_per_component(p, 10));
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m->size()));
  c(0) = 1.0;
  Density d{m, c, 1.0};
  double en = energy_norm(d, 1.0);

  const QuadratureRule& g = gauss_legendre(40);
  double T = 4000, acc = 0;
  int np = 800;
  for (int pnl = 0; pnl < np; ++pnl) {
    double x0 = T * pnl / np, x1 = T * (pnl + 1) / np;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      double xi = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * g.nodes[i].x;
      double f = (2 - 2 * std::cos(0.1 * xi)) / (xi * xi * std::sqrt(1 + xi * xi));
      acc += 0.5 * (x1 - x0) * g.weights[i] * f;
    }
  }
  acc += 2.0 * 0.01 / (2 * T * T);  // tail
  double oracle = std::sqrt(acc / kPi);
  CHECK(std::fabs(en - oracle) / oracle < 1e-3);
}

TEST_CASE("energy norm of the unit square matches its Fourier representation") {
  Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, 0);
  auto m = std::make_shared<Mesh>(mesh_per_component(p, 1));
  Density d{m, Eigen::VectorXcd::Ones(1), 1.0};
  double en = energy_norm(d, 1.0);

  const QuadratureRule& g = gauss_legendre(24);
  auto seg = [&](double lo, double hi, auto&& f) {
    double s = 0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      s += 0.5 * (hi - lo) * g.weights[i] * f(0.5 * (lo + hi) + 0.5 * (hi - lo) * g.nodes[i].x);
    return s;
  };
  std::vector<double> brk{0};
  for (double x = 2; x <= 900; x *= 1.6) brk.push_back(x);
  double acc = 0;
  for (std::size_t ib = 0; ib + 1 < brk.size(); ++ib)
    for (std::size_t jb = 0; jb + 1 < brk.size(); ++jb) {
      acc += seg(brk[ib], brk[ib + 1], [&](double x) {
        return seg(brk[jb], brk[jb + 1], [&](double y) {
          double fx = x == 0 ? 1.0 : (2 - 2 * std::cos(x)) / (x * x);
          double fy = y == 0 ? 1.0 : (2 - 2 * std::cos(y)) / (y * y);
          return fx * fy / std::sqrt(1 + x * x + y * y);
        });
      });
    }
  double oracle = std::sqrt(4 * acc / (4 * kPi * kPi));
  CHECK(std::fabs(en - oracle) / oracle < 1e-3);
}

TEST_CASE("quadratic form is invariant under subdivision") {
  // same indicator function represented on nested lattices
  Prefractal tri = generate_prefractal(Family::sierpinski, Rational(1, 2), 0, 0);
  auto coarse = std::make_shared<Mesh>(uniform_lattice_mesh(tri, Rational(1, 2)));
  auto fine = std::make_shared<Mesh>(uniform_lattice_mesh(tri, Rational(1, 4)));
  int ci = -1;
  for (std::size_t e = 0; e < coarse->size(); ++e) {
    const EisTriangle& t = std::get<EisTriangle>(coarse->elements[e].parts_exact[0]);
    if (t.v[0] == EisPoint{Rational(0), Rational(0)} &&
        eis_sub(t.v[1], t.v[0]) == EisPoint{Rational(1, 2), Rational(0)})
      ci = static_cast<int>(e);
  }
  REQUIRE(ci >= 0);
  Eigen::VectorXcd cc = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(coarse->size()));
  cc(ci) = 1.0;
  Density dc{coarse, cc, 1.0};

  Eigen::VectorXcd cf = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(fine->size()));
  int picked = 0;
  for (std::size_t e = 0; e < fine->size(); ++e) {
    const EisTriangle& t = std::get<EisTriangle>(fine->elements[e].parts_exact[0]);
    bool inside = true;
    for (int i = 0; i < 3; ++i) {
      Rational s = t.v[i].a + t.v[i].b;
      if (t.v[i].a < 0 || t.v[i].b < 0 || s > Rational(1, 2)) inside = false;
    }
    if (inside) {
      cf(static_cast<Eigen::Index>(e)) = 1.0;
      ++picked;
    }
  }
  CHECK(picked == 4);
  Density df{fine, cf, 1.0};
  double qc = quadratic_form(dc, 1.0);
  double qf = quadratic_form(df, 1.0);
  CHECK(std::fabs(qc - qf) / qc < 1e-10);
  // the two representations describe the same function
  CHECK(density_difference_norm(dc, df) < 1e-6 * energy_norm(dc, 1.0));

  Prefractal sq = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, 0);
  auto c1 = std::make_shared<Mesh>(mesh_per_component(sq, 1));
  auto f16 = std::make_shared<Mesh>(mesh_per_component(sq, 4));
  Density ds{c1, Eigen::VectorXcd::Ones(1), 1.0};
  Density dfine{f16, Eigen::VectorXcd::Ones(4), 1.0};
  CHECK(std::fabs(quadratic_form(ds, 1.0) - quadratic_form(dfine, 1.0)) / quadratic_form(ds, 1.0) < 1e-10);
  CHECK(density_difference_norm(ds, dfine) < 1e-6 * energy_norm(ds, 1.0));
}

TEST_CASE("separated pair couplings match brute tensor quadrature") {
  double kappa = 1.0;
  Prefractal tri = generate_prefractal(Family::sierpinski, Rational(1, 2), 0, 0);
  auto m = std::make_shared<Mesh>(uniform_lattice_mesh(tri, Rational(1, 8)));
  Vec2 a{1.0 / 8, 0}, b{1.0 / 16, std::numbers::sqrt3 / 16};
  int iup0 = -1, iup1 = -1, idn = -1;
  for (std::size_t e = 0; e < m->size(); ++e) {
    const EisTriangle& t = std::get<EisTriangle>(m->elements[e].parts_exact[0]);
    EisPoint d1 = eis_sub(t.v[1], t.v[0]);
    bool up = d1 == EisPoint{Rational(1, 8), Rational(0)};
    if (up && t.v[0] == EisPoint{Rational(0), Rational(0)}) iup0 = static_cast<int>(e);
    if (up && t.v[0] == EisPoint{Rational(5, 8), Rational(1, 8)}) iup1 = static_cast<int>(e);
    if (!up) {
      for (int i = 0; i < 3; ++i)
        if (t.v[i] == EisPoint{Rational(5, 8), Rational(2, 8)} &&
            eis_sub(t.v[(i + 1) % 3], t.v[i]) == EisPoint{Rational(-1, 8), Rational(0)})
          idn = static_cast<int>(e);
    }
  }
  REQUIRE(iup0 >= 0);
  REQUIRE(iup1 >= 0);
  REQUIRE(idn >= 0);

  double self;
  {
    Density d{m, Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m->size())), 1.0};
    d.coefficients(iup0) = 1.0;
    self = quadratic_form(d, kappa);
  }
  auto pair_coupling = [&](int i, int j) {
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m->size()));
    c(i) = 1.0;
    c(j) = 1.0;
    Density d{m, c, 1.0};
    return 0.5 * (quadratic_form(d, kappa) - 2 * self);
  };

  double uu = pair_coupling(iup0, iup1);
  double uu_ref = brute_tri_pair(a, b, Vec2{0, 0}, 0,
                                 Vec2{5.0 / 8 + 1.0 / 16, std::numbers::sqrt3 / 16}, 0, kappa, 20);
  CHECK(std::fabs(uu - uu_ref) / uu_ref < 1e-9);

  double ud = pair_coupling(iup0, idn);
  double ud_ref = brute_tri_pair(a, b, Vec2{0, 0}, 0,
                                 Vec2{5.0 / 8 + 2.0 / 16, 2.0 * std::numbers::sqrt3 / 16}, 1, kappa, 20);
  CHECK(std::fabs(ud - ud_ref) / ud_ref < 1e-9);

  // square pair from the level-1 dust
  Prefractal dust = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, 1);
  auto md = std::make_shared<Mesh>(mesh_per_component(dust, 1));
  double self_sq;
  {
    Density d{md, Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(md->size())), 1.0};
    d.coefficients(0) = 1.0;
    self_sq = quadratic_form(d, kappa);
  }
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(md->size()));
  c(0) = 1.0;
  c(1) = 1.0;
  Density d{md, c, 1.0};
  double eng = 0.5 * (quadratic_form(d, kappa) - 2 * self_sq);

  const ExactSquare& s0 = std::get<ExactSquare>(md->elements[0].parts_exact[0]);
  const ExactSquare& s1 = std::get<ExactSquare>(md->elements[1].parts_exact[0]);
  const QuadratureRule& g = gauss_legendre(20);
  double L = to_double(s0.side);
  double ox = to_double(s1.x) - to_double(s0.x), oy = to_double(s1.y) - to_double(s0.y);
  double acc = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    for (std::size_t j = 0; j < g.nodes.size(); ++j)
      for (std::size_t k2 = 0; k2 < g.nodes.size(); ++k2)
        for (std::size_t l = 0; l < g.nodes.size(); ++l) {
          double x1 = 0.5 * L * (g.nodes[i].x + 1), y1 = 0.5 * L * (g.nodes[j].x + 1);
          double x2 = ox + 0.5 * L * (g.nodes[k2].x + 1), y2 = oy + 0.5 * L * (g.nodes[l].x + 1);
          double r = std::hypot(x1 - x2, y1 - y2);
          acc += std::pow(0.5 * L, 4) * g.weights[i] * g.weights[j] * g.weights[k2] *
                 g.weights[l] * std::exp(-kappa * r) / (4 * kPi * r);
        }
  CHECK(std::fabs(eng - acc) / acc < 1e-9);
}

TEST_CASE("norm equivalence, homogeneity and gram agreement") {
  Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, 1);
  auto m = std::make_shared<Mesh>(mesh_per_component(p, 4));
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd c(static_cast<Eigen::Index>(m->size()));
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = cplx(nd(rng), nd(rng));
  Density d{m, c, 30.0};

  EquivalenceReport rep = norm_equivalence_check(d);
  CHECK(rep.pass);
  CHECK(rep.norm_standard > 0);
  CHECK(rep.lower <= rep.norm_wavenumber);
  CHECK(rep.norm_wavenumber <= rep.upper);

  Density d3{m, 3.0 * c, 30.0};
  CHECK(energy_norm(d3, 1.0) / energy_norm(d, 1.0) == doctest::Approx(3.0).epsilon(1e-12));

  EnergyForm form = build_energy_form(m, 1.0);
  CHECK(form.gram.rows() == static_cast<Eigen::Index>(m->size()));
  double eg = energy_norm(form, c);
  double es = energy_norm(d, 1.0);
  CHECK(std::fabs(eg - es) / es < 1e-10);

  Density mismatched{m, Eigen::VectorXcd::Ones(3), 1.0};
  CHECK_THROWS_AS(energy_norm(mismatched, 1.0), std::invalid_argument);
}

TEST_CASE("observation norms") {
  FieldGrid g = near_field_box_2d(4);
  g.values.assign(g.points.size(), cplx(0.0, 2.0));
  CHECK(near_field_norm(g) == doctest::Approx(2.0 * 3.0).epsilon(1e-13));  // area 9

  DirectionSet circ = circle_directions(16);
  std::vector<cplx> ones(circ.directions.size(), cplx(1.0, 0.0));
  CHECK(farfield_norm(circ, ones) == doctest::Approx(std::sqrt(2.0 * kPi)).epsilon(1e-13));

  DirectionSet sph = sphere_directions(4, 8);
  std::vector<cplx> ones3(sph.directions.size(), cplx(0.0, 1.0));
  CHECK(farfield_norm(sph, ones3) == doctest::Approx(std::sqrt(4.0 * kPi)).epsilon(1e-12));
}

TEST_CASE("difference norm bridges the snowflake lattice pair") {
  Prefractal pin = generate_snowflake(kPi / 6, SnowflakeSide::inner, 1);
  Prefractal pout = generate_snowflake(kPi / 6, SnowflakeSide::outer, 0);
  auto mi = std::make_shared<Mesh>(uniform_lattice_mesh(pin, Rational(1, 9)));
  auto mo = std::make_shared<Mesh>(uniform_lattice_mesh_subdivided(pout, 3));
  REQUIRE(mi->size() == 108);
  REQUIRE(mo->size() == 54);

  Density din{mi, Eigen::VectorXcd::Ones(108), 1.0};
  Density dout{mo, Eigen::VectorXcd::Ones(54), 1.0};
  double dn = density_difference_norm(din, dout);
  double dn_swapped = density_difference_norm(dout, din);
  CHECK(dn == doctest::Approx(0.1846186763).epsilon(1e-6));
  CHECK(dn_swapped == doctest::Approx(dn).epsilon(1e-12));

  Density broken{mi, Eigen::VectorXcd::Ones(5), 1.0};
  CHECK_THROWS_AS(density_difference_norm(broken, dout), std::invalid_argument);
}
