#pragma once

// Configuration-driven experiment drivers: level/alpha/wavenumber sweeps and
// the inner/outer snowflake comparison, with deterministic CSV + manifest
// outputs.

#include <iosfwd>
#include <string>
#include <vector>

#include "fracbem/bem.hpp"
#include "fracbem/fields.hpp"

namespace fracbem {

struct MeshPolicy {
  enum class Kind { per_component, grouped, lattice };
  Kind kind = Kind::per_component;
  int n0 = 1;                // per_component: children per prefractal cell
  int ancestor_level = -1;   // grouped: -1 means the run level itself
  int lattice_exponent = 5;  // lattice: spacing = base^-max(exponent, level)
};

struct RunConfig {
  Family family = Family::cantor_set;
  Rational alpha = Rational(1, 3);
  Rational delta = Rational(0);
  Rational beta_over_pi = Rational(1, 6);  // snowflake apex half-angle / pi
  SnowflakeSide side = SnowflakeSide::inner;
  int level = 0;
  int level_lo = 0, level_hi = 0;
  double k = 30.0;
  std::vector<double> k_list;
  std::vector<Rational> alpha_list;
  Vec3 direction{0.0, 0.0, -1.0};
  bool direction_set = false;  // false: per-ambient default
  DiscretizationMethod method = DiscretizationMethod::collocation;
  MeshPolicy mesh;
  double min_dof_per_wavelength = 0;  // 0 = fixed policy, else adapts n0 to k
  int reference_level = -1;           // error sweeps; -1 = finest level
  int grid_n = 0;                     // near-field samples per axis; 0 = default
  std::size_t dense_limit = 12000;
  std::string output_dir = "out";
  bool out_csv = true;
  bool out_manifest = true;
  bool out_fields = false;
  bool out_far = false;
  bool out_mesh = false;
};

// Strict parse: unknown keys are errors.  Rationals are strings "p/q" or
// finite decimals; beta is the apex half-angle as a fraction of pi.
RunConfig parse_config(const std::string& json_text);
std::string config_json(const RunConfig& cfg);  // round-trippable echo

struct RunRecord {
  std::string family;
  std::string params;  // semicolon-separated key=value list, comma-free
  int j = 0;
  std::size_t n = 0;   // DOF count, equals mesh element count
  double h = 0;
  double norm_energy = 0;
  double norm_near = 0;
  double norm_far = 0;
  double err_near = 0;
  double err_far = 0;
  double seconds = 0;
  bool warning = false;
  std::string note;
};

struct SweepResult {
  std::vector<RunRecord> records;
  std::vector<Density> densities;  // solved densities in sweep order; exports use the last
  bool has_fit = false;
  double fit_exponent = 0;  // least-squares slope of log norm vs log k
};

// Solve per level and record the energy (kappa = 1), near-field and
// far-field norms.  Levels whose DOF count exceeds dense_limit truncate the
// sweep with a warning record.
SweepResult run_level_sweep(const RunConfig& cfg);

// As run_level_sweep, plus relative near/far errors against the reference
// level (default: the finest level that fits the DOF budget).
SweepResult run_error_sweep(const RunConfig& cfg);

// Fixed level, one record per alpha in cfg.alpha_list.
SweepResult run_alpha_sweep(const RunConfig& cfg);

// Two records per k (params norm=standard and norm=wavenumber, carrying the
// kappa = 1 and kappa = k energy norms); fits the growth exponent of the
// wavenumber norm over the top half of the k range when it has >= 2 points.
SweepResult run_k_sweep(const RunConfig& cfg);

// Alternating screen sequence inner_lo, outer_lo, inner_lo+1, ...,
// inner_hi on the common lattice; err_near holds the density difference
// against the previous screen divided by the energy norm of the pair's
// inner member.
SweepResult run_snowflake_comparison(const RunConfig& cfg);

void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records);

// Writes records.csv, manifest.json and any requested field/far/mesh
// artifacts for the finest solved density into cfg.output_dir.
void export_outputs(const RunConfig& cfg, const SweepResult& result);

// Mesh construction shared by the sweeps and the CLI generate command.
std::shared_ptr<const Mesh> build_mesh(const RunConfig& cfg, int level);
std::shared_ptr<const Mesh> build_snowflake_mesh(const RunConfig& cfg, SnowflakeSide side,
                                                 int level);

}  // namespace fracbem
