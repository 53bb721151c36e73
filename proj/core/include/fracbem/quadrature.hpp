#pragma once

// Quadrature rules and singular/near-singular integration for flat-screen
// layer potentials.  Reference rules are Gauss-Legendre on [-1, 1] and a
// 7-point symmetric rule on the unit right triangle; singular self-terms use
// closed forms built from exact kernel antiderivatives.

#include <complex>
#include <vector>

#include "fracbem/kernels.hpp"
#include "fracbem/mesh.hpp"

namespace fracbem {

struct QuadratureRule {
  std::vector<Vec2> nodes;     // points in the reference element ([-1,1] on the x axis, or unit triangle)
  std::vector<double> weights; // sum to the reference measure (2 resp. 1/2)
  int exact_degree = 0;
};

// Gauss-Legendre rule on [-1, 1], n in [1, 64].  Nodes are (x, 0).
const QuadratureRule& gauss_legendre(int n);

// Degree-3 symmetric rule on the triangle (0,0), (1,0), (0,1):
// vertices, edge midpoints and centroid with weights (3,3,3,8,8,8,27)/120.
const QuadratureRule& triangle_rule_7pt();

// Per-axis point count for the oscillatory-kernel policy: at least 3, and at
// least 20 h / lambda points once elements span a noticeable fraction of a
// wavelength.  points_per_element is the resulting tensor count q^(n-1).
int points_per_axis(double h, double wavelength);
int points_per_element(double h, double wavelength, int ambient);

// Euclidean distance from a point to the closed cell (screen plane z = 0).
double cell_distance(const Cell& cell, const Vec3& x);

// Integral of the kernel over one primitive cell against a fixed target
// point.  Subdivides 4-way (2-way for segments) while the target is closer
// than the cell diameter, then applies the mapped policy rule (tensor Gauss
// on segments/squares, the fixed 7-point rule on triangles).
std::complex<double> cell_integral(const KernelSpec& spec, const Cell& cell,
                                   const Vec3& target, int q);

// Same over a full element (sum over parts).  Requires the target to lie
// outside the closure of every part; throws std::invalid_argument otherwise
// (singular targets belong to diagonal_entry).
std::complex<double> element_integral(const KernelSpec& spec, const Element& element,
                                      const Vec3& target);

// Singular diagonal term: integral of the kernel over a cell of size `size`
// against its own center.  `size` is the side length for squares and
// triangles and the full length for segments.  Closed polar forms for the 2D
// cells, exact antiderivatives for segments.
std::complex<double> diagonal_entry(const KernelSpec& spec, ElementKind kind, double size);

// Antiderivatives of the 2D-ambient kernels at unit wavenumber:
//   hankel_integral_0(b) = int_0^b (i/4) H0^(1)(z) dz
//   hankel_integral_1(b) = int_0^b z (i/4) H0^(1)(z) dz
//   k0_integral_0(b)     = int_0^b (1/2pi) K0(z) dz
//   k0_integral_1(b)     = int_0^b z (1/2pi) K0(z) dz
// Entire-series evaluation below z = 8, panel quadrature tail above.
std::complex<double> hankel_integral_0(double b);
std::complex<double> hankel_integral_1(double b);
double k0_integral_0(double b);
double k0_integral_1(double b);

// Galerkin-type pair integral int_{a1}^{b1} int_{a2}^{b2} Phi(|x-y|) dy dx
// for the 2D-ambient kernel, exact via the overlap covariogram.  Handles any
// interval pair (self, touching, overlapping, separated).
std::complex<double> segment_pair_integral(const KernelSpec& spec,
                                           double a1, double b1,
                                           double a2, double b2);

// int_0^x e^{-kappa r} r^m dr for m = 0, 1, 2, series-stable for small x.
double exp_moment(int m, double kappa, double x);
// int_a^b e^{-kappa r} r^m dr, stable shifted evaluation.
double exp_moment_interval(int m, double kappa, double a, double b);

} // namespace fracbem
