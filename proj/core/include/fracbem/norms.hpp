#pragma once

// Diagnostic norms: the energy (H^{-1/2}-type) norm realised through the
// modified single-layer form at decay kappa, midpoint L2 norms on field
// grids, quadrature L2 norms of far-field patterns, and the difference norm
// of two piecewise-constant densities on a common lattice.

#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "fracbem/bem.hpp"
#include "fracbem/fields.hpp"

namespace fracbem {

// Galerkin matrix of the modified single-layer operator over a mesh.
struct EnergyForm {
  std::shared_ptr<const Mesh> mesh;
  double kappa = 1.0;
  Eigen::MatrixXd gram;  // symmetric positive definite
};

// Assembles the dense Gram matrix and verifies positive definiteness
// (Cholesky); throws when the form fails to be numerically positive.
EnergyForm build_energy_form(std::shared_ptr<const Mesh> mesh, double kappa);

// ||phi|| = sqrt(2 c^H B c).  The Density overload streams the quadratic
// form without materialising B, so it scales to large meshes.
double energy_norm(const EnergyForm& form, const Eigen::VectorXcd& c);
double energy_norm(const Density& d, double kappa);

struct EquivalenceReport {
  double norm_standard = 0;    // kappa = 1
  double norm_wavenumber = 0;  // kappa = k
  double lower = 0;            // min(1, k^-1/2) * norm_standard
  double upper = 0;            // max(1, k^-1/2) * norm_standard
  bool pass = false;
};

// Verifies min(1,k^-1/2)||.||_1 <= ||.||_k <= max(1,k^-1/2)||.||_1 with a
// small slack; k is taken from the density.
EquivalenceReport norm_equivalence_check(const Density& d);

// Midpoint-rule L2 norm over the grid (values must be populated).
double near_field_norm(const FieldGrid& grid);

// Quadrature L2 norm of a far-field pattern on its direction set.
double farfield_norm(const DirectionSet& dirs,
                     const std::vector<std::complex<double>>& values);

// || d1 - d2 || in the kappa = 1 energy norm after zero-extending both onto
// the finest common lattice.  Koch snowflake inner/outer pairs map the outer
// solution onto the inner lattice by averaging the two outer elements
// adjacent to each fine-cell centroid.  Throws when the meshes do not embed
// in a common lattice.
double density_difference_norm(const Density& d1, const Density& d2);

} // namespace fracbem
