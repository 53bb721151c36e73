#pragma once

// Boundary element meshes over prefractal screens.  Elements are either
// single primitive cells (segments, squares, lattice triangles) or groups of
// cells sharing one collocation node.  Exact rational descriptions of all
// cells are kept alongside the floating-point geometry so that lattice
// alignment, element offsets and disjointness can be decided exactly.

#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "fracbem/geometry.hpp"

namespace fracbem {

enum class ElementKind { segment, square, triangle, cell_group };

struct SegmentCell {                 // subset of the x axis (2D ambient)
  double x0 = 0, x1 = 0;
};
struct SquareCell {
  Vec2 ll{};                         // lower-left corner
  double side = 0;
};
struct TriangleCell {
  Vec2 v0{}, v1{}, v2{};             // counter-clockwise
};

using Cell = std::variant<SegmentCell, SquareCell, TriangleCell>;

double cell_measure(const Cell& c);
double cell_diameter(const Cell& c);
Vec2 cell_centroid(const Cell& c);

// Exact twins of the float cells.  Triangles are kept in lattice basis
// coordinates (basis (1,0), (1/2, sqrt3/2)).
struct ExactSegment { Rational x0, x1; };
struct ExactSquare  { Rational x, y, side; };
using ExactCell = std::variant<ExactSegment, ExactSquare, EisTriangle>;

struct Element {
  ElementKind kind = ElementKind::segment;
  std::vector<Cell> parts;           // one entry unless kind == cell_group
  std::vector<ExactCell> parts_exact;
  Vec2 center{};                     // collocation node (centroid; for groups, of the ancestor cell)
  double diameter = 0;
  double measure = 0;
};

struct Mesh {
  int ambient = 3;
  std::vector<Element> elements;
  double h = 0;                      // max element diameter
  std::shared_ptr<const Prefractal> screen;

  std::size_t size() const { return elements.size(); }
};

// Split every level-j cell of an IFS-family prefractal into n0 congruent
// children (n0 must be a perfect square for 2D cells).  Snowflake families
// are rejected: their cells are not a single-map IFS orbit.
Mesh mesh_per_component(const Prefractal& p, int n0);

// Group the level-j cells below each level-i ancestor (i <= j) into one
// element; node and diameter come from the ancestor cell.  i == j gives the
// same element list as mesh_per_component(p, 1).
Mesh mesh_grouped(const Prefractal& p, int ancestor_level);

// Uniform lattice mesh for snowflake interiors and the standard Sierpinski
// screen: all lattice cells of spacing h tiling the screen.  h must divide
// the native cell spacing exactly.
Mesh uniform_lattice_mesh(const Prefractal& p, const Rational& h);
// Same, with the subdivision factor given directly (each native cell splits
// into m^2 lattice cells; needed for outer snowflake screens whose native
// spacing is irrational).
Mesh uniform_lattice_mesh_subdivided(const Prefractal& p, int m);

struct PreconvexReport {
  bool pass = false;
  bool hulls_disjoint = false;
  bool measure_match = false;
  double measure_sum = 0;
  double screen_measure = 0;
  std::string detail;
};

// Pre-convexity: open convex hulls of distinct elements are pairwise
// disjoint (touching is allowed) and element measures sum to the screen
// measure.  Exact for common-lattice meshes; separating-axis test otherwise.
PreconvexReport validate_preconvex(const Mesh& m);

// L2 orthogonal projection onto piecewise constants: coefficient on T is
// (1/|T|) int_T f.  The integrand receives in-plane coordinates (x, 0) for
// segments.
std::vector<std::complex<double>> l2_project(const Mesh& m,
                                             const std::function<std::complex<double>(Vec2)>& f);

std::string to_json(const Mesh& m);

} // namespace fracbem
