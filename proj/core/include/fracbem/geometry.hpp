#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <array>
#include <string>
#include <vector>

#include "fracbem/types.hpp"

// Prefractal screens generated either by an iterated function system (Cantor
// set, Cantor dust, Sierpinski triangle, optionally thickened) or by polygon
// rewriting (triangular and square snowflakes).  All coordinates are kept as
// exact rationals; triangular-lattice geometry is stored in the basis
// e1 = (1,0), e2 = (1/2, sqrt(3)/2), in which every family we use (including
// the 30-degree-rotated outer snowflake lattice) has rational coordinates.
// Floating point appears only when meshes are built from these cells.

namespace fracbem {

using Rational = boost::multiprecision::cpp_rational;

double to_double(const Rational& r);

struct RatPoint {
  Rational x, y;
  bool operator==(const RatPoint& o) const { return x == o.x && y == o.y; }
  bool operator<(const RatPoint& o) const { return x < o.x || (x == o.x && y < o.y); }
};

struct RatInterval {
  Rational x0, x1;  // x0 < x1
};

struct RatSquare {
  Rational x, y;  // lower-left corner
  Rational side;
};

// Point a*e1 + b*e2 on the triangular lattice basis.
struct EisPoint {
  Rational a, b;
  bool operator==(const EisPoint& o) const { return a == o.a && b == o.b; }
  bool operator<(const EisPoint& o) const { return a < o.a || (a == o.a && b < o.b); }
};

Vec2 to_vec2(const RatPoint& p);
Vec2 to_vec2(const EisPoint& p);
EisPoint eis_add(const EisPoint& p, const EisPoint& q);
EisPoint eis_sub(const EisPoint& p, const EisPoint& q);
// multiplication by a + b*omega, omega = exp(i pi/3)
EisPoint eis_mul(const EisPoint& p, const Rational& a, const Rational& b);
Rational eis_dist2(const EisPoint& p, const EisPoint& q);  // squared Euclidean distance

struct EisTriangle {
  std::array<EisPoint, 3> v;  // counterclockwise
};

// twice the signed area in units of sqrt(3)/2
Rational tri_cross(const EisTriangle& t);
// splits t into m^2 congruent copies (alternating orientations), appended to out
void subdivide_triangle(const EisTriangle& t, int m, std::vector<EisTriangle>& out);

struct Similarity {
  int dim = 1;                       // 1 or 2
  Rational ratio;                    // contraction factor r in (0,1)
  std::array<std::array<Rational, 2>, 2> linear;  // orthogonal-times-r matrix
  RatPoint translation;
  // when set, the translation lives on the triangular lattice and is stored in
  // translation_eis instead (its cartesian y is irrational)
  bool eis_translation = false;
  EisPoint translation_eis;

  RatPoint apply(const RatPoint& p) const;
  Vec2 apply(Vec2 p) const;
};

struct OpenSetSpec {
  enum class Shape { interval, square, triangle } shape = Shape::interval;
  // interval: (origin.x, origin.x + size); square: origin + (0,size)^2;
  // triangle: equilateral, lower-left vertex `origin` in lattice basis, side `size`.
  RatPoint origin;
  Rational size = 1;
};

struct IteratedFunctionSystem {
  int dim = 1;
  std::vector<Similarity> maps;
  OpenSetSpec open_set;
};

// log(nu)/log(1/r) for equal contraction ratios; throws otherwise.
double attractor_dimension(const IteratedFunctionSystem& ifs);

// Checks s_m(O) subset O with pairwise disjoint open images, exactly.
bool open_set_condition(const IteratedFunctionSystem& ifs);

enum class Family { cantor_set, cantor_dust, sierpinski, koch_snowflake, square_snowflake };
enum class SnowflakeSide { inner, outer };

IteratedFunctionSystem make_ifs(Family family, const Rational& alpha);

struct Prefractal {
  Family family = Family::cantor_set;
  int level = 0;
  Rational alpha;         // contraction ratio (1/2 for sierpinski)
  Rational delta;         // component thickening, 0 = standard
  double beta = 0.0;      // snowflake apex half-angle
  SnowflakeSide side = SnowflakeSide::inner;
  bool exact_lattice = true;

  // cell decomposition; exactly one list is populated per family
  std::vector<RatInterval> intervals;   // cantor_set
  std::vector<RatSquare> squares;       // cantor_dust, square_snowflake
  std::vector<EisTriangle> triangles;   // sierpinski, snowflake at beta = pi/6

  // boundary polygon (snowflake families)
  std::vector<RatPoint> polygon;        // square_snowflake, exact
  std::vector<EisPoint> polygon_eis;    // snowflake at beta = pi/6, exact
  std::vector<Vec2> polygon_f;          // snowflake, any beta

  int ambient() const;       // space dimension of the scattering problem
  double measure() const;    // total length (n=2) or area (n=3) of the cells
  double cell_diameter() const;
};

Prefractal generate_prefractal(Family family, const Rational& alpha, const Rational& delta, int level);
Prefractal generate_snowflake(double beta, SnowflakeSide side, int level);
Prefractal generate_square_snowflake(int level);

std::string to_json(const Prefractal& p);

}  // namespace fracbem
