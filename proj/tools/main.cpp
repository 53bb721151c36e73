#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fracbem/harness.hpp"
#include "fracbem/norms.hpp"
#include "fracbem/quadrature.hpp"

using nlohmann::json;
using namespace fracbem;

namespace {

struct Flags {
  std::string config_file;
  std::string family, alpha, delta, beta, side, method, policy;
  std::string output_dir;
  std::vector<double> direction;
  std::vector<int> levels;
  int level = 0;
  double k = 30.0;
  std::vector<double> k_list;
  std::vector<std::string> alpha_list;
  int n0 = 1, ancestor_level = -1, lattice_exponent = 5;
  double min_dof_per_wavelength = 0;
  int reference_level = -1, grid_n = 0;
  long long dense_limit = 12000;
  bool fields = false, far = false, mesh_json = false;
  bool no_csv = false, no_manifest = false;
};

void add_run_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_file, "JSON config file; its values override flags")
      ->check(CLI::ExistingFile);
  sub->add_option("--family", f.family,
                  "cantor_set | cantor_dust | sierpinski | koch_snowflake | square_snowflake");
  sub->add_option("--alpha", f.alpha, "contraction ratio, e.g. 1/3");
  sub->add_option("--delta", f.delta, "component thickening, e.g. 1/10");
  sub->add_option("--beta", f.beta, "snowflake apex half-angle as a fraction of pi, e.g. 1/6");
  sub->add_option("--side", f.side, "snowflake side: inner | outer");
  sub->add_option("--level", f.level, "prefractal level");
  sub->add_option("--levels", f.levels, "level range: lo hi")->expected(2);
  sub->add_option("--k", f.k, "wavenumber");
  sub->add_option("--k-list", f.k_list, "wavenumbers for sweep-k");
  sub->add_option("--alpha-list", f.alpha_list, "contraction ratios for sweep-alpha");
  sub->add_option("--direction", f.direction, "incident unit direction, 2 or 3 components")
      ->expected(2, 3);
  sub->add_option("--method", f.method, "collocation | galerkin");
  sub->add_option("--mesh-policy", f.policy, "per_component | grouped | lattice");
  sub->add_option("--n0", f.n0, "children per prefractal cell (per_component policy)");
  sub->add_option("--ancestor-level", f.ancestor_level, "grouping level (grouped policy)");
  sub->add_option("--lattice-exponent", f.lattice_exponent,
                  "lattice spacing = base^-exponent (lattice policy)");
  sub->add_option("--min-dof-per-wavelength", f.min_dof_per_wavelength,
                  "adapt n0 to each wavenumber in sweep-k");
  sub->add_option("--reference-level", f.reference_level,
                  "error reference level (default: finest solved)");
  sub->add_option("--grid-n", f.grid_n, "near-field samples per axis");
  sub->add_option("--dense-limit", f.dense_limit, "dense solver size cap");
  sub->add_option("--output-dir", f.output_dir, "artifact directory");
  sub->add_flag("--fields", f.fields, "write near-field CSV and PGM images");
  sub->add_flag("--far", f.far, "write the far-field CSV");
  sub->add_flag("--mesh-json", f.mesh_json, "write screen and mesh JSON");
  sub->add_flag("--no-csv", f.no_csv, "skip records.csv");
  sub->add_flag("--no-manifest", f.no_manifest, "skip manifest.json");
}

json flags_to_json(const CLI::App* sub, const Flags& f) {
  json j = json::object();
  auto has = [&](const std::string& name) { return sub->count(name) > 0; };
  if (has("--family")) j["family"] = f.family;
  if (has("--alpha")) j["alpha"] = f.alpha;
  if (has("--delta")) j["delta"] = f.delta;
  if (has("--beta")) j["beta"] = f.beta;
  if (has("--side")) j["side"] = f.side;
  if (has("--level")) j["level"] = f.level;
  if (has("--levels")) j["levels"] = f.levels;
  if (has("--k")) j["k"] = f.k;
  if (has("--k-list")) j["k_list"] = f.k_list;
  if (has("--alpha-list")) j["alpha_list"] = f.alpha_list;
  if (has("--direction")) j["direction"] = f.direction;
  if (has("--method")) j["method"] = f.method;
  json mesh = json::object();
  if (has("--mesh-policy")) mesh["policy"] = f.policy;
  if (has("--n0")) mesh["n0"] = f.n0;
  if (has("--ancestor-level")) mesh["ancestor_level"] = f.ancestor_level;
  if (has("--lattice-exponent")) mesh["lattice_exponent"] = f.lattice_exponent;
  if (!mesh.empty()) j["mesh"] = mesh;
  if (has("--min-dof-per-wavelength")) j["min_dof_per_wavelength"] = f.min_dof_per_wavelength;
  if (has("--reference-level")) j["reference_level"] = f.reference_level;
  if (has("--grid-n")) j["grid_n"] = f.grid_n;
  if (has("--dense-limit")) j["dense_limit"] = f.dense_limit;
  if (has("--output-dir")) j["output_dir"] = f.output_dir;
  json outs = json::object();
  if (has("--fields")) outs["fields"] = true;
  if (has("--far")) outs["far"] = true;
  if (has("--mesh-json")) outs["mesh"] = true;
  if (has("--no-csv")) outs["csv"] = false;
  if (has("--no-manifest")) outs["manifest"] = false;
  if (!outs.empty()) j["outputs"] = outs;
  return j;
}

RunConfig merge_config(const CLI::App* sub, const Flags& f) {
  json j = flags_to_json(sub, f);
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    std::stringstream ss;
    ss << in.rdbuf();
    json file;
    try {
      file = json::parse(ss.str());
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config: " + f.config_file + ": " + e.what());
    }
    if (!file.is_object()) throw std::invalid_argument("config: top level must be an object");
    j.update(file);
  }
  if (sub->get_name() == "compare-snowflake") {
    if (!j.contains("family")) j["family"] = "koch_snowflake";
    int hi = j.contains("levels") ? j["levels"][1].get<int>() : 0;
    if (!j.contains("mesh")) j["mesh"] = json::object();
    if (!j["mesh"].contains("policy")) j["mesh"]["policy"] = "lattice";
    if (!j["mesh"].contains("lattice_exponent")) j["mesh"]["lattice_exponent"] = std::max(3, hi);
  }
  return parse_config(j.dump());
}

void finish_run(const RunConfig& cfg, const SweepResult& res) {
  export_outputs(cfg, res);
  write_records_csv(std::cout, res.records);
  if (res.has_fit) std::fprintf(stderr, "fit exponent: %.6g\n", res.fit_exponent);
  std::fprintf(stderr, "wrote %s\n", cfg.output_dir.c_str());
}

int cmd_generate(const RunConfig& cfg) {
  auto mesh = build_mesh(cfg, cfg.level);
  PreconvexReport rep = validate_preconvex(*mesh);
  namespace fs = std::filesystem;
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  if (mesh->screen) {
    std::ofstream os(dir / "screen.json");
    os << to_json(*mesh->screen) << '\n';
  }
  {
    std::ofstream os(dir / "mesh.json");
    os << to_json(*mesh) << '\n';
  }
  json out;
  out["level"] = cfg.level;
  out["elements"] = mesh->size();
  out["h"] = mesh->h;
  out["measure"] = mesh->screen ? mesh->screen->measure() : 0.0;
  out["preconvex"] = rep.pass;
  std::cout << out.dump(2) << '\n';
  std::fprintf(stderr, "wrote %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_validate() {
  int failures = 0;
  auto check = [&](bool ok, const char* name) {
    std::printf("%s: %s\n", ok ? "ok" : "FAIL", name);
    if (!ok) ++failures;
  };

  {
    bool ok = true;
    for (int j = 0; j <= 4 && ok; ++j) {
      Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, j);
      ok = p.squares.size() == (std::size_t{1} << (2 * j));
    }
    check(ok, "cantor dust component counts 4^j");
  }
  {
    static const std::size_t want[5] = {1, 12, 120, 1128, 10344};
    bool ok = true;
    for (int j = 0; j <= 4 && ok; ++j) {
      Prefractal p = generate_snowflake(std::numbers::pi / 6, SnowflakeSide::inner, j);
      ok = p.triangles.size() == want[j];
    }
    check(ok, "triangular snowflake lattice cell counts");
  }
  {
    bool ok = true;
    for (int j = 0; j <= 3 && ok; ++j) {
      Prefractal p = generate_square_snowflake(j);
      Rational area = 0;
      for (const auto& s : p.squares) area += s.side * s.side;
      std::size_t segs = 4;
      for (int i = 0; i < j; ++i) segs *= 8;
      ok = area == 1 && p.polygon.size() == segs;
    }
    check(ok, "square snowflake exact area and boundary counts");
  }

  {
    double sq = diagonal_entry(KernelSpec::helmholtz(3, 1e-3), ElementKind::square, 1.0).real();
    double sq_want = std::log(1.0 + std::numbers::sqrt2) / std::numbers::pi;
    check(std::fabs(sq / sq_want - 1.0) < 1e-3, "square self-integral static limit");
    double tr = diagonal_entry(KernelSpec::helmholtz(3, 1e-3), ElementKind::triangle, 1.0).real();
    double tr_want =
        3.0 / (8.0 * std::sqrt(3.0) * std::numbers::pi) * 2.0 * std::log(2.0 + std::sqrt(3.0));
    check(std::fabs(tr / tr_want - 1.0) < 1e-3, "triangle self-integral static limit");
  }

  {
    Prefractal p = generate_prefractal(Family::cantor_dust, Rational(1, 3), 0, 2);
    check(validate_preconvex(mesh_per_component(p, 4)).pass, "cantor dust mesh pre-convexity");
    Prefractal s = generate_prefractal(Family::sierpinski, Rational(1, 2), 0, 2);
    check(validate_preconvex(uniform_lattice_mesh(s, Rational(1, 8))).pass,
          "sierpinski lattice mesh pre-convexity");
  }

  {
    RunConfig cfg = parse_config(R"({"family":"cantor_set","alpha":"1/3","level":4,"k":30.0})");
    auto mesh = build_mesh(cfg, 4);
    Density d = solve_density(*mesh, IncidentWave{cfg.k, cfg.direction});
    check(norm_equivalence_check(d).pass, "energy norm wavenumber equivalence at k = 30");
  }

  {
    RunConfig cfg = parse_config(R"({"family":"cantor_set","alpha":"1/3","level":2,"k":1.0})");
    auto mesh = build_mesh(cfg, 2);
    Density d = solve_density(*mesh, IncidentWave{1.0, cfg.direction});
    DirectionSet dirs = circle_directions(8);
    auto ff = far_field(d, dirs);
    std::vector<Vec3> pts;
    const double r = 200.0;
    for (const Vec3& dd : dirs.directions) pts.push_back(Vec3{r * dd.x, r * dd.y, 0.0});
    auto us = eval_scattered(d, pts);
    double peak = 0;
    for (const auto& v : ff) peak = std::max(peak, std::abs(v));
    double worst = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::complex<double> pred = std::exp(std::complex<double>(0.0, r)) / std::sqrt(r) * ff[i];
      double denom = std::max(std::abs(pred), 0.1 * peak / std::sqrt(r));
      worst = std::max(worst, std::abs(us[i] - pred) / denom);
    }
    check(worst < 5e-3, "far-field pattern matches the scattered field at distance 200");
  }

  if (failures > 0)
    throw std::runtime_error(std::to_string(failures) + " validation checks failed");
  std::printf("all validation checks passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boundary element solver for acoustic scattering by fractal screens"};
  app.require_subcommand(1);

  Flags f;
  CLI::App* generate = app.add_subcommand("generate", "build a screen and mesh, write JSON");
  CLI::App* solve = app.add_subcommand("solve", "solve one level and record its norms");
  CLI::App* sweep_levels =
      app.add_subcommand("sweep-levels", "solve a level range with errors against a reference");
  CLI::App* sweep_alpha = app.add_subcommand("sweep-alpha", "solve one level per contraction ratio");
  CLI::App* sweep_k = app.add_subcommand("sweep-k", "solve per wavenumber, fit the norm growth");
  CLI::App* compare = app.add_subcommand(
      "compare-snowflake", "solve the alternating inner/outer snowflake sequence");
  CLI::App* validate = app.add_subcommand("validate", "run the built-in oracle checks");
  for (CLI::App* sub : {generate, solve, sweep_levels, sweep_alpha, sweep_k, compare})
    add_run_flags(sub, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    json err;
    err["error"] = std::string(e.get_name()) + ": " + e.what();
    std::cerr << err.dump() << '\n';
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    if (validate->parsed()) return cmd_validate();
    CLI::App* sub = app.get_subcommands().front();
    RunConfig cfg = merge_config(sub, f);
    if (generate->parsed()) return cmd_generate(cfg);
    if (solve->parsed()) {
      cfg.level_lo = cfg.level_hi = cfg.level;
      finish_run(cfg, run_level_sweep(cfg));
    } else if (sweep_levels->parsed()) {
      finish_run(cfg, run_error_sweep(cfg));
    } else if (sweep_alpha->parsed()) {
      finish_run(cfg, run_alpha_sweep(cfg));
    } else if (sweep_k->parsed()) {
      finish_run(cfg, run_k_sweep(cfg));
    } else if (compare->parsed()) {
      finish_run(cfg, run_snowflake_comparison(cfg));
    }
    return 0;
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << '\n';
    return 1;
  }
}
