#pragma once

// Discrete single-layer systems on screen meshes: collocation for planar
// (3D-ambient) screens, Galerkin for screens on a line (2D ambient), and a
// dense direct solve.  Convention: S phi = -g with g = -e^{ik d.x}, so the
// right-hand side entries are e^{ik d.x} samples resp. moments.

#include <complex>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "fracbem/kernels.hpp"
#include "fracbem/mesh.hpp"

namespace fracbem {

struct IncidentWave {
  double k = 1.0;
  Vec3 direction{0.0, 0.0, -1.0};  // unit propagation direction
};

void validate_wave(const IncidentWave& w);

struct LinearSystem {
  Eigen::MatrixXcd matrix;
  Eigen::VectorXcd rhs;
};

struct Density {
  std::shared_ptr<const Mesh> mesh;
  Eigen::VectorXcd coefficients;
  double k = 0.0;
};

// Collocation at element nodes, in either ambient dimension; mesh must be
// pre-convex (nodes of other elements may not touch an element closure, else
// assembly fails).
LinearSystem assemble_collocation(const Mesh& m, const IncidentWave& wave);

// Piecewise-constant Galerkin on segment meshes, every entry exact via
// kernel antiderivatives.  The matrix is complex symmetric.
LinearSystem assemble_galerkin_2d(const Mesh& m, const IncidentWave& wave);

struct SolveInfo {
  Eigen::VectorXcd coefficients;
  double relative_residual = 0.0;
};

// Dense LU with partial pivoting.  Errors if the system exceeds dense_limit
// or is numerically singular (reports a condition estimate).
SolveInfo solve(const LinearSystem& sys, std::size_t dense_limit = 12000);

enum class DiscretizationMethod { collocation, galerkin };

// Assemble and solve in one step.
Density solve_density(const Mesh& m, const IncidentWave& wave,
                      DiscretizationMethod method = DiscretizationMethod::collocation,
                      std::size_t dense_limit = 12000);

// Little-endian dump: uint64 N, row-major matrix (re, im doubles), then rhs.
void write_system_binary(const LinearSystem& sys, const std::string& path);

} // namespace fracbem
