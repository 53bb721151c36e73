#pragma once

// Scattered/total field evaluation away from the screen, far-field patterns,
// and the fixed observation geometries (near-field boxes, direction sets)
// together with CSV/PGM exports.

#include <complex>
#include <string>
#include <vector>

#include "fracbem/bem.hpp"

namespace fracbem {

struct FieldGrid {
  struct Face {
    std::size_t offset = 0;  // first sample index
    int nx = 0, ny = 0;
    std::string label;
  };
  int ambient = 2;
  std::vector<Vec3> points;     // midpoint samples
  std::vector<double> weights;  // sample cell measures (sum = total area)
  std::vector<Face> faces;
  std::vector<std::complex<double>> values;
};

// Box (-1,2) x (-1.5,1.5) sampled at n x n midpoints (n even keeps samples
// off the screen line y = 0).
FieldGrid near_field_box_2d(int n = 300);
// Faces x = -1, y = 2, z = -1 of the box (-1,2) x (-1,2) x (-1,1), n x n
// midpoints each (areas 6, 6, 9).
FieldGrid near_field_faces_3d(int n = 301);

struct DirectionSet {
  int ambient = 2;
  std::vector<Vec3> directions;
  std::vector<double> weights;     // spherical/circular quadrature weights
  std::vector<double> theta;       // polar angle (2D: angle in the plane)
  std::vector<double> phi;         // 3D only
};

// Equispaced angles theta_i = 2 pi i / n on the circle (trapezoid weights).
DirectionSet circle_directions(int n = 256);
// Gauss in cos(theta) x equispaced longitude (exact for smooth integrands).
DirectionSet sphere_directions(int n_theta = 64, int n_phi = 128);

// u(x) = -sum_m c_m int_{T_m} Phi(x, y) ds(y); points must lie off the
// screen closure (throws otherwise).
std::vector<std::complex<double>> eval_scattered(const Density& d, const std::vector<Vec3>& points);
// scattered + incident plane wave
std::vector<std::complex<double>> eval_total(const Density& d, const IncidentWave& wave,
                                             const std::vector<Vec3>& points);
// fills grid.values with the scattered field
void eval_scattered(const Density& d, FieldGrid& grid);

// Far-field pattern: u_inf(xhat) = pref(k, n) sum_m c_m int e^{-ik xhat.y},
// pref = -1/(4 pi) for n = 3 and e^{-i 3 pi/4} / sqrt(8 pi k) for n = 2.
std::vector<std::complex<double>> far_field(const Density& d, const DirectionSet& dirs);

void write_field_csv(const std::string& path, const FieldGrid& grid);
// one image per face: plain PGM of |u| scaled linearly to 0..255
void write_field_pgm(const std::string& path_prefix, const FieldGrid& grid);
void write_far_csv(const std::string& path, const DirectionSet& dirs,
                   const std::vector<std::complex<double>>& values);

} // namespace fracbem
