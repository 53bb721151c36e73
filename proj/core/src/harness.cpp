#include "fracbem/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>

#include "fracbem/norms.hpp"
#include "json.hpp"

namespace fracbem {

namespace {

using nlohmann::json;
using cplx = std::complex<double>;

[[noreturn]] void config_error(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string rat_string(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

Rational rational_from_string(const std::string& s) {
  if (s.empty()) config_error("empty rational value");
  std::size_t slash = s.find('/');
  if (slash != std::string::npos) {
    try {
      return Rational(s);
    } catch (const std::exception&) {
      config_error("cannot parse rational \"" + s + "\"");
    }
  }
  std::size_t dot = s.find('.');
  if (dot == std::string::npos) {
    try {
      return Rational(s);
    } catch (const std::exception&) {
      config_error("cannot parse rational \"" + s + "\"");
    }
  }
  bool neg = s[0] == '-';
  std::size_t start = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  std::string digits = s.substr(start, dot - start) + s.substr(dot + 1);
  std::size_t frac_len = s.size() - dot - 1;
  // strip leading zeros; cpp_int would read them as an octal prefix
  std::size_t nz = digits.find_first_not_of('0');
  digits = nz == std::string::npos ? "0" : digits.substr(nz);
  if (frac_len == 0 || digits.find_first_not_of("0123456789") != std::string::npos)
    config_error("cannot parse rational \"" + s + "\"");
  try {
    Rational num(digits);
    Rational den = 1;
    for (std::size_t i = 0; i < frac_len; ++i) den *= 10;
    Rational r = num / den;
    return neg ? Rational(-r) : r;
  } catch (const std::exception&) {
    config_error("cannot parse rational \"" + s + "\"");
  }
}

Rational rational_from_json(const json& v, const std::string& key) {
  if (v.is_string()) return rational_from_string(v.get<std::string>());
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::floor(d) == d && std::fabs(d) < 9.0e15) return Rational(static_cast<long long>(d));
    config_error("\"" + key + "\" must be exact; write non-integers as a string like \"1/3\"");
  }
  config_error("\"" + key + "\" must be a rational number");
}

const char* family_name(Family f) {
  switch (f) {
    case Family::cantor_set: return "cantor_set";
    case Family::cantor_dust: return "cantor_dust";
    case Family::sierpinski: return "sierpinski";
    case Family::koch_snowflake: return "koch_snowflake";
    case Family::square_snowflake: return "square_snowflake";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "cantor_set") return Family::cantor_set;
  if (s == "cantor_dust") return Family::cantor_dust;
  if (s == "sierpinski") return Family::sierpinski;
  if (s == "koch_snowflake") return Family::koch_snowflake;
  if (s == "square_snowflake") return Family::square_snowflake;
  config_error("unknown family \"" + s + "\"");
}

int family_ambient(Family f) { return f == Family::cantor_set ? 2 : 3; }

Vec3 default_direction(int ambient) {
  if (ambient == 2) return Vec3{0.5, -std::sqrt(3.0) / 2.0, 0.0};
  return Vec3{0.0, std::numbers::sqrt2 / 2.0, -std::numbers::sqrt2 / 2.0};
}

Vec3 run_direction(const RunConfig& cfg) {
  if (cfg.direction_set) return cfg.direction;
  return default_direction(family_ambient(cfg.family));
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (item.key() == a) ok = true;
    if (!ok) config_error("unknown key \"" + item.key() + "\" in " + where);
  }
}

MeshPolicy::Kind policy_from_string(const std::string& s) {
  if (s == "per_component") return MeshPolicy::Kind::per_component;
  if (s == "grouped") return MeshPolicy::Kind::grouped;
  if (s == "lattice") return MeshPolicy::Kind::lattice;
  config_error("unknown mesh policy \"" + s + "\"");
}

const char* policy_name(MeshPolicy::Kind k) {
  switch (k) {
    case MeshPolicy::Kind::per_component: return "per_component";
    case MeshPolicy::Kind::grouped: return "grouped";
    case MeshPolicy::Kind::lattice: return "lattice";
  }
  return "?";
}

std::string policy_string(const MeshPolicy& m) {
  switch (m.kind) {
    case MeshPolicy::Kind::per_component:
      return "per_component:" + std::to_string(m.n0);
    case MeshPolicy::Kind::grouped:
      return "grouped:" + std::to_string(m.ancestor_level);
    case MeshPolicy::Kind::lattice:
      return "lattice:" + std::to_string(m.lattice_exponent);
  }
  return "?";
}

std::string direction_string(const Vec3& d, int ambient) {
  std::string s = fmt_g(d.x) + "|" + fmt_g(d.y);
  if (ambient == 3) s += "|" + fmt_g(d.z);
  return s;
}

// comma-free key=value list for the CSV params column
std::string run_params(const RunConfig& cfg, double k) {
  std::string s;
  switch (cfg.family) {
    case Family::cantor_set:
    case Family::cantor_dust:
      s = "alpha=" + rat_string(cfg.alpha);
      if (cfg.delta != 0) s += ";delta=" + rat_string(cfg.delta);
      break;
    case Family::sierpinski:
      if (cfg.delta != 0) s += "delta=" + rat_string(cfg.delta);
      break;
    case Family::koch_snowflake:
      s = "beta=" + rat_string(cfg.beta_over_pi) + "pi;side=" +
          (cfg.side == SnowflakeSide::inner ? "inner" : "outer");
      break;
    case Family::square_snowflake:
      break;
  }
  if (!s.empty()) s += ";";
  s += "k=" + fmt_g(k);
  s += ";d=" + direction_string(run_direction(cfg), family_ambient(cfg.family));
  s += ";method=";
  s += cfg.method == DiscretizationMethod::galerkin ? "galerkin" : "collocation";
  s += ";mesh=" + policy_string(cfg.mesh);
  return s;
}

double weighted_l2(const std::vector<double>& w, const std::vector<cplx>& a) {
  double q = 0;
  for (std::size_t i = 0; i < a.size(); ++i) q += w[i] * std::norm(a[i]);
  return std::sqrt(q);
}

double weighted_l2_diff(const std::vector<double>& w, const std::vector<cplx>& a,
                        const std::vector<cplx>& b) {
  double q = 0;
  for (std::size_t i = 0; i < a.size(); ++i) q += w[i] * std::norm(a[i] - b[i]);
  return std::sqrt(q);
}

FieldGrid observation_grid(const RunConfig& cfg, int ambient) {
  int n = cfg.grid_n;
  if (n <= 0) n = ambient == 2 ? 120 : 60;
  return ambient == 2 ? near_field_box_2d(n) : near_field_faces_3d(n);
}

DirectionSet observation_directions(int ambient) {
  return ambient == 2 ? circle_directions() : sphere_directions();
}

Rational pow_rational(int base, int e) {
  Rational r = 1;
  for (int i = 0; i < e; ++i) r /= base;
  return r;
}

struct SolveOut {
  RunRecord rec;
  Density den;
  std::vector<cplx> near_vals;
  std::vector<cplx> far_vals;
  bool solved = false;
};

RunRecord base_record(const RunConfig& cfg, int level, double k) {
  RunRecord rec;
  rec.family = family_name(cfg.family);
  rec.params = run_params(cfg, k);
  rec.j = level;
  return rec;
}

RunRecord dof_warning_record(const RunConfig& cfg, int level, double k,
                             const std::shared_ptr<const Mesh>& mesh) {
  RunRecord rec = base_record(cfg, level, k);
  rec.n = mesh->size();
  rec.h = mesh->h;
  double nan = std::numeric_limits<double>::quiet_NaN();
  rec.norm_energy = rec.norm_near = rec.norm_far = nan;
  rec.err_near = rec.err_far = nan;
  rec.warning = true;
  rec.note = "level " + std::to_string(level) + ": " + std::to_string(mesh->size()) +
             " unknowns exceed the dense solver limit " + std::to_string(cfg.dense_limit) +
             "; not solved";
  return rec;
}

// solve one screen level and collect norms; observation values kept for
// error sweeps
SolveOut solve_one(const RunConfig& cfg, int level, double k, bool want_observations,
                   const FieldGrid& grid_proto, const DirectionSet& dirs,
                   const std::shared_ptr<const Mesh>& mesh) {
  auto t0 = std::chrono::steady_clock::now();
  SolveOut out;
  out.rec = base_record(cfg, level, k);
  out.rec.n = mesh->size();
  out.rec.h = mesh->h;

  IncidentWave wave{k, run_direction(cfg)};
  out.den = solve_density(*mesh, wave, cfg.method, cfg.dense_limit);
  out.rec.norm_energy = energy_norm(out.den, 1.0);
  if (want_observations) {
    FieldGrid grid = grid_proto;
    eval_scattered(out.den, grid);
    out.rec.norm_near = near_field_norm(grid);
    out.near_vals = std::move(grid.values);
    out.far_vals = far_field(out.den, dirs);
    out.rec.norm_far = farfield_norm(dirs, out.far_vals);
  }
  out.solved = true;
  out.rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::vector<SolveOut> sweep_levels_impl(const RunConfig& cfg) {
  int ambient = family_ambient(cfg.family);
  FieldGrid proto = observation_grid(cfg, ambient);
  DirectionSet dirs = observation_directions(ambient);
  std::vector<SolveOut> out;
  for (int j = cfg.level_lo; j <= cfg.level_hi; ++j) {
    auto mesh = build_mesh(cfg, j);
    if (mesh->size() > cfg.dense_limit) {
      SolveOut w;
      w.rec = dof_warning_record(cfg, j, cfg.k, mesh);
      out.push_back(std::move(w));
      break;
    }
    out.push_back(solve_one(cfg, j, cfg.k, true, proto, dirs, mesh));
  }
  return out;
}

SweepResult collect(std::vector<SolveOut>&& solves) {
  SweepResult res;
  for (SolveOut& s : solves) {
    res.records.push_back(std::move(s.rec));
    if (s.solved) res.densities.push_back(std::move(s.den));
  }
  return res;
}

// least-squares slope of log y against log x
double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double n = static_cast<double>(pts.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string iso_utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) config_error("top level must be an object");
  check_keys(j,
             {"family", "alpha", "delta", "beta", "side", "level", "levels", "k", "k_list",
              "alpha_list", "direction", "method", "mesh", "min_dof_per_wavelength",
              "reference_level", "grid_n", "dense_limit", "output_dir", "outputs"},
             "config");

  RunConfig cfg;
  if (j.contains("family")) cfg.family = family_from_string(j.at("family").get<std::string>());
  if (j.contains("alpha")) cfg.alpha = rational_from_json(j.at("alpha"), "alpha");
  if (j.contains("delta")) cfg.delta = rational_from_json(j.at("delta"), "delta");
  if (j.contains("beta")) {
    cfg.beta_over_pi = rational_from_json(j.at("beta"), "beta");
    if (!(cfg.beta_over_pi > 0 && cfg.beta_over_pi < Rational(1, 2)))
      config_error("beta must lie in (0, 1/2) as a fraction of pi");
  }
  if (j.contains("side")) {
    std::string s = j.at("side").get<std::string>();
    if (s == "inner")
      cfg.side = SnowflakeSide::inner;
    else if (s == "outer")
      cfg.side = SnowflakeSide::outer;
    else
      config_error("side must be \"inner\" or \"outer\"");
  }

  bool have_level = j.contains("level");
  if (have_level) {
    if (!j.at("level").is_number_integer()) config_error("\"level\" must be an integer");
    cfg.level = j.at("level").get<int>();
    if (cfg.level < 0) config_error("\"level\" must be nonnegative");
    cfg.level_lo = cfg.level_hi = cfg.level;
  }
  if (j.contains("levels")) {
    const json& lv = j.at("levels");
    if (!lv.is_array() || lv.size() != 2 || !lv[0].is_number_integer() ||
        !lv[1].is_number_integer())
      config_error("\"levels\" must be an array [lo, hi] of integers");
    cfg.level_lo = lv[0].get<int>();
    cfg.level_hi = lv[1].get<int>();
    if (cfg.level_lo < 0 || cfg.level_hi < cfg.level_lo)
      config_error("\"levels\" needs 0 <= lo <= hi");
    if (!have_level) cfg.level = cfg.level_hi;
  }

  if (j.contains("k")) {
    if (!j.at("k").is_number()) config_error("\"k\" must be a number");
    cfg.k = j.at("k").get<double>();
    if (!(cfg.k > 0)) config_error("\"k\" must be positive");
  }
  if (j.contains("k_list")) {
    const json& kl = j.at("k_list");
    if (!kl.is_array()) config_error("\"k_list\" must be an array of numbers");
    for (const json& v : kl) {
      if (!v.is_number()) config_error("\"k_list\" must be an array of numbers");
      double k = v.get<double>();
      if (!(k > 0)) config_error("wavenumbers in \"k_list\" must be positive");
      cfg.k_list.push_back(k);
    }
  }
  if (j.contains("alpha_list")) {
    const json& al = j.at("alpha_list");
    if (!al.is_array()) config_error("\"alpha_list\" must be an array");
    for (const json& v : al) cfg.alpha_list.push_back(rational_from_json(v, "alpha_list"));
  }

  if (j.contains("direction")) {
    const json& d = j.at("direction");
    if (!d.is_array() || (d.size() != 2 && d.size() != 3))
      config_error("\"direction\" must be an array of 2 or 3 numbers");
    for (const json& v : d)
      if (!v.is_number()) config_error("\"direction\" must be an array of numbers");
    cfg.direction = Vec3{d[0].get<double>(), d[1].get<double>(),
                         d.size() == 3 ? d[2].get<double>() : 0.0};
    cfg.direction_set = true;
  }

  if (j.contains("method")) {
    std::string s = j.at("method").get<std::string>();
    if (s == "collocation")
      cfg.method = DiscretizationMethod::collocation;
    else if (s == "galerkin")
      cfg.method = DiscretizationMethod::galerkin;
    else
      config_error("method must be \"collocation\" or \"galerkin\"");
  }

  if (j.contains("mesh")) {
    const json& m = j.at("mesh");
    if (!m.is_object()) config_error("\"mesh\" must be an object");
    check_keys(m, {"policy", "n0", "ancestor_level", "lattice_exponent"}, "mesh");
    if (m.contains("policy")) cfg.mesh.kind = policy_from_string(m.at("policy").get<std::string>());
    if (m.contains("n0")) {
      cfg.mesh.n0 = m.at("n0").get<int>();
      if (cfg.mesh.n0 < 1) config_error("mesh n0 must be at least 1");
    }
    if (m.contains("ancestor_level")) cfg.mesh.ancestor_level = m.at("ancestor_level").get<int>();
    if (m.contains("lattice_exponent")) {
      cfg.mesh.lattice_exponent = m.at("lattice_exponent").get<int>();
      if (cfg.mesh.lattice_exponent < 0) config_error("mesh lattice_exponent must be nonnegative");
    }
  }

  if (j.contains("min_dof_per_wavelength")) {
    cfg.min_dof_per_wavelength = j.at("min_dof_per_wavelength").get<double>();
    if (cfg.min_dof_per_wavelength < 0) config_error("min_dof_per_wavelength must be nonnegative");
  }
  if (j.contains("reference_level")) cfg.reference_level = j.at("reference_level").get<int>();
  if (j.contains("grid_n")) {
    cfg.grid_n = j.at("grid_n").get<int>();
    if (cfg.grid_n < 0) config_error("grid_n must be nonnegative");
  }
  if (j.contains("dense_limit")) {
    long long lim = j.at("dense_limit").get<long long>();
    if (lim < 1) config_error("dense_limit must be positive");
    cfg.dense_limit = static_cast<std::size_t>(lim);
  }
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    if (!o.is_object()) config_error("\"outputs\" must be an object");
    check_keys(o, {"csv", "manifest", "fields", "far", "mesh"}, "outputs");
    if (o.contains("csv")) cfg.out_csv = o.at("csv").get<bool>();
    if (o.contains("manifest")) cfg.out_manifest = o.at("manifest").get<bool>();
    if (o.contains("fields")) cfg.out_fields = o.at("fields").get<bool>();
    if (o.contains("far")) cfg.out_far = o.at("far").get<bool>();
    if (o.contains("mesh")) cfg.out_mesh = o.at("mesh").get<bool>();
  }

  // resolve the ambient-dependent default so the echo is explicit
  if (!cfg.direction_set) {
    cfg.direction = default_direction(family_ambient(cfg.family));
    cfg.direction_set = true;
  }
  return cfg;
}

std::string config_json(const RunConfig& cfg) {
  json j;
  j["family"] = family_name(cfg.family);
  j["alpha"] = rat_string(cfg.alpha);
  j["delta"] = rat_string(cfg.delta);
  j["beta"] = rat_string(cfg.beta_over_pi);
  j["side"] = cfg.side == SnowflakeSide::inner ? "inner" : "outer";
  j["level"] = cfg.level;
  j["levels"] = json::array({cfg.level_lo, cfg.level_hi});
  j["k"] = cfg.k;
  if (!cfg.k_list.empty()) j["k_list"] = cfg.k_list;
  if (!cfg.alpha_list.empty()) {
    auto arr = json::array();
    for (const Rational& a : cfg.alpha_list) arr.push_back(rat_string(a));
    j["alpha_list"] = arr;
  }
  Vec3 d = run_direction(cfg);
  if (family_ambient(cfg.family) == 2)
    j["direction"] = json::array({d.x, d.y});
  else
    j["direction"] = json::array({d.x, d.y, d.z});
  j["method"] = cfg.method == DiscretizationMethod::galerkin ? "galerkin" : "collocation";
  j["mesh"] = {{"policy", policy_name(cfg.mesh.kind)},
               {"n0", cfg.mesh.n0},
               {"ancestor_level", cfg.mesh.ancestor_level},
               {"lattice_exponent", cfg.mesh.lattice_exponent}};
  if (cfg.min_dof_per_wavelength > 0) j["min_dof_per_wavelength"] = cfg.min_dof_per_wavelength;
  if (cfg.reference_level >= 0) j["reference_level"] = cfg.reference_level;
  if (cfg.grid_n > 0) j["grid_n"] = cfg.grid_n;
  j["dense_limit"] = cfg.dense_limit;
  j["output_dir"] = cfg.output_dir;
  j["outputs"] = {{"csv", cfg.out_csv},
                  {"manifest", cfg.out_manifest},
                  {"fields", cfg.out_fields},
                  {"far", cfg.out_far},
                  {"mesh", cfg.out_mesh}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// meshes

std::shared_ptr<const Mesh> build_snowflake_mesh(const RunConfig& cfg, SnowflakeSide side,
                                                 int level) {
  if (cfg.mesh.kind != MeshPolicy::Kind::lattice)
    config_error("snowflake screens use the lattice mesh policy");
  double beta = std::numbers::pi * to_double(cfg.beta_over_pi);
  Prefractal p = generate_snowflake(beta, side, level);
  int e = cfg.mesh.lattice_exponent;
  if (side == SnowflakeSide::inner) {
    Rational h = pow_rational(3, std::max(e, level));
    return std::make_shared<Mesh>(uniform_lattice_mesh(p, h));
  }
  // outer cells sit on a rotated lattice; subdividing level j by 3^(e-1-j)
  // lands the cell area on 3^-(2e-1), matching the inner spacing 3^-e
  int ee = std::max(e, level + 1);
  int m = 1;
  for (int i = 0; i < ee - 1 - level; ++i) m *= 3;
  return std::make_shared<Mesh>(uniform_lattice_mesh_subdivided(p, m));
}

std::shared_ptr<const Mesh> build_mesh(const RunConfig& cfg, int level) {
  if (cfg.family == Family::koch_snowflake) return build_snowflake_mesh(cfg, cfg.side, level);

  Prefractal p = cfg.family == Family::square_snowflake
                     ? generate_square_snowflake(level)
                     : generate_prefractal(cfg.family, cfg.alpha, cfg.delta, level);
  switch (cfg.mesh.kind) {
    case MeshPolicy::Kind::per_component:
      return std::make_shared<Mesh>(mesh_per_component(p, cfg.mesh.n0));
    case MeshPolicy::Kind::grouped: {
      int anc = cfg.mesh.ancestor_level;
      if (anc < 0 || anc > level) anc = level;
      return std::make_shared<Mesh>(mesh_grouped(p, anc));
    }
    case MeshPolicy::Kind::lattice: {
      int base;
      if (cfg.family == Family::sierpinski)
        base = 2;
      else if (cfg.family == Family::square_snowflake)
        base = 4;
      else
        config_error("lattice meshing applies to Sierpinski and snowflake screens");
      Rational h = pow_rational(base, std::max(cfg.mesh.lattice_exponent, level));
      return std::make_shared<Mesh>(uniform_lattice_mesh(p, h));
    }
  }
  config_error("unhandled mesh policy");
}

// ---------------------------------------------------------------------------
// sweeps

SweepResult run_level_sweep(const RunConfig& cfg) { return collect(sweep_levels_impl(cfg)); }

SweepResult run_error_sweep(const RunConfig& cfg) {
  std::vector<SolveOut> solves = sweep_levels_impl(cfg);

  int ref_idx = -1;
  if (cfg.reference_level >= 0) {
    for (std::size_t i = 0; i < solves.size(); ++i)
      if (solves[i].solved && solves[i].rec.j == cfg.reference_level)
        ref_idx = static_cast<int>(i);
    if (ref_idx < 0)
      config_error("reference level " + std::to_string(cfg.reference_level) +
                   " was not solved in this sweep");
  } else {
    for (std::size_t i = 0; i < solves.size(); ++i)
      if (solves[i].solved) ref_idx = static_cast<int>(i);
    if (ref_idx < 0) return collect(std::move(solves));
  }

  int ambient = family_ambient(cfg.family);
  FieldGrid proto = observation_grid(cfg, ambient);
  DirectionSet dirs = observation_directions(ambient);
  const SolveOut& ref = solves[static_cast<std::size_t>(ref_idx)];
  double near_ref = weighted_l2(proto.weights, ref.near_vals);
  double far_ref = weighted_l2(dirs.weights, ref.far_vals);
  for (SolveOut& s : solves) {
    if (!s.solved) continue;
    s.rec.err_near = weighted_l2_diff(proto.weights, s.near_vals, ref.near_vals) / near_ref;
    s.rec.err_far = weighted_l2_diff(dirs.weights, s.far_vals, ref.far_vals) / far_ref;
  }
  return collect(std::move(solves));
}

SweepResult run_alpha_sweep(const RunConfig& cfg) {
  std::vector<SolveOut> solves;
  int ambient = family_ambient(cfg.family);
  FieldGrid proto = observation_grid(cfg, ambient);
  DirectionSet dirs = observation_directions(ambient);
  for (const Rational& alpha : cfg.alpha_list) {
    RunConfig c = cfg;
    c.alpha = alpha;
    auto mesh = build_mesh(c, cfg.level);
    if (mesh->size() > cfg.dense_limit) {
      SolveOut w;
      w.rec = dof_warning_record(c, cfg.level, cfg.k, mesh);
      solves.push_back(std::move(w));
      continue;
    }
    solves.push_back(solve_one(c, cfg.level, cfg.k, true, proto, dirs, mesh));
  }
  return collect(std::move(solves));
}

SweepResult run_k_sweep(const RunConfig& cfg) {
  std::vector<SolveOut> solves;
  std::vector<std::pair<double, double>> fit_pts;
  double kmin = 0, kmax = 0;
  for (double k : cfg.k_list) {
    if (kmin == 0 || k < kmin) kmin = k;
    if (k > kmax) kmax = k;
  }

  for (double k : cfg.k_list) {
    RunConfig c = cfg;
    c.k = k;
    if (cfg.min_dof_per_wavelength > 0) {
      if (cfg.mesh.kind != MeshPolicy::Kind::per_component)
        config_error("min_dof_per_wavelength requires the per_component mesh policy");
      // native cell side alpha^level; per-axis split m keeps spacing below
      // wavelength / min_dof_per_wavelength
      double side = std::pow(to_double(cfg.family == Family::sierpinski ? Rational(1, 2) : cfg.alpha),
                             cfg.level);
      double target = cfg.min_dof_per_wavelength * k * side / (2 * std::numbers::pi);
      int m = std::max(1, static_cast<int>(std::ceil(target - 1e-9)));
      c.mesh.n0 = family_ambient(cfg.family) == 2 ? m : m * m;
    }
    auto mesh = build_mesh(c, cfg.level);
    if (mesh->size() > cfg.dense_limit) {
      SolveOut w;
      w.rec = dof_warning_record(c, cfg.level, k, mesh);
      solves.push_back(std::move(w));
      continue;
    }
    SolveOut s = solve_one(c, cfg.level, k, false, FieldGrid{}, DirectionSet{}, mesh);
    double norm_k = energy_norm(s.den, k);

    SolveOut wk;
    wk.rec = s.rec;
    wk.rec.params += ";norm=wavenumber";
    wk.rec.norm_energy = norm_k;
    s.rec.params += ";norm=standard";

    if (k >= 0.5 * (kmin + kmax) - 1e-12) fit_pts.emplace_back(k, norm_k);
    solves.push_back(std::move(s));
    solves.push_back(std::move(wk));
  }

  SweepResult res = collect(std::move(solves));
  if (fit_pts.size() >= 2) {
    res.has_fit = true;
    res.fit_exponent = loglog_slope(fit_pts);
  }
  return res;
}

SweepResult run_snowflake_comparison(const RunConfig& cfg) {
  if (cfg.family != Family::koch_snowflake)
    config_error("snowflake comparison needs family koch_snowflake");
  if (cfg.mesh.kind != MeshPolicy::Kind::lattice)
    config_error("snowflake comparison uses the lattice mesh policy");
  if (cfg.mesh.lattice_exponent < cfg.level_hi)
    config_error("lattice exponent must be at least the top level so all screens share a lattice");

  // alternating sequence: inner_lo, outer_lo, inner_lo+1, ..., inner_hi
  std::vector<std::pair<SnowflakeSide, int>> screens;
  for (int j = cfg.level_lo; j <= cfg.level_hi; ++j) {
    screens.emplace_back(SnowflakeSide::inner, j);
    if (j < cfg.level_hi) screens.emplace_back(SnowflakeSide::outer, j);
  }

  FieldGrid proto = observation_grid(cfg, 3);
  DirectionSet dirs = observation_directions(3);
  std::vector<SolveOut> solves;
  for (auto [side, j] : screens) {
    RunConfig c = cfg;
    c.side = side;
    auto mesh = build_snowflake_mesh(c, side, j);
    if (mesh->size() > cfg.dense_limit) {
      SolveOut w;
      w.rec = dof_warning_record(c, j, cfg.k, mesh);
      solves.push_back(std::move(w));
      break;
    }
    solves.push_back(solve_one(c, j, cfg.k, true, proto, dirs, mesh));
  }

  // err_near: density difference to the previous screen over the energy norm
  // of the pair's inner member
  for (std::size_t i = 1; i < solves.size(); ++i) {
    if (!solves[i].solved || !solves[i - 1].solved) break;
    double dd = density_difference_norm(solves[i - 1].den, solves[i].den);
    double inner_norm = screens[i].first == SnowflakeSide::inner ? solves[i].rec.norm_energy
                                                                 : solves[i - 1].rec.norm_energy;
    solves[i].rec.err_near = dd / inner_norm;
  }
  return collect(std::move(solves));
}

// ---------------------------------------------------------------------------
// outputs

void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "family,params,j,N,h,norm_energy,norm_near,norm_far,err_near,err_far,seconds\n";
  for (const RunRecord& r : records) {
    os << r.family << ',' << r.params << ',' << r.j << ',' << r.n << ',' << fmt_g(r.h) << ','
       << fmt_g(r.norm_energy) << ',' << fmt_g(r.norm_near) << ',' << fmt_g(r.norm_far) << ','
       << fmt_g(r.err_near) << ',' << fmt_g(r.err_far) << ',' << fmt_g(r.seconds) << '\n';
  }
}

void export_outputs(const RunConfig& cfg, const SweepResult& result) {
  namespace fs = std::filesystem;
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  if (cfg.out_csv) {
    std::ofstream os(dir / "records.csv");
    if (!os) throw std::runtime_error("cannot write " + (dir / "records.csv").string());
    write_records_csv(os, result.records);
  }

  if (cfg.out_manifest) {
    json m;
    m["config"] = json::parse(config_json(cfg));
    if (cfg.k_list.empty()) {
      m["lambda"] = 2 * std::numbers::pi / cfg.k;
    } else {
      auto arr = json::array();
      for (double k : cfg.k_list) arr.push_back(2 * std::numbers::pi / k);
      m["lambda"] = arr;
    }
    m["record_count"] = result.records.size();
    if (result.has_fit) m["fit_exponent"] = result.fit_exponent;
    auto warnings = json::array();
    for (const RunRecord& r : result.records)
      if (r.warning) warnings.push_back(r.note);
    m["warnings"] = warnings;
    m["versions"] = {{"project", "0.1.0"},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    m["generated_at"] = iso_utc_now();
    std::ofstream os(dir / "manifest.json");
    if (!os) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    os << m.dump(2) << '\n';
  }

  if ((cfg.out_fields || cfg.out_far || cfg.out_mesh) && !result.densities.empty()) {
    const Density& den = result.densities.back();
    int ambient = den.mesh->ambient;
    if (cfg.out_fields) {
      int n = cfg.grid_n > 0 ? cfg.grid_n : (ambient == 2 ? 300 : 301);
      FieldGrid grid = ambient == 2 ? near_field_box_2d(n) : near_field_faces_3d(n);
      eval_scattered(den, grid);
      write_field_csv((dir / "field.csv").string(), grid);
      write_field_pgm((dir / "field").string(), grid);
    }
    if (cfg.out_far) {
      DirectionSet dirs = observation_directions(ambient);
      std::vector<cplx> vals = far_field(den, dirs);
      write_far_csv((dir / "far.csv").string(), dirs, vals);
    }
    if (cfg.out_mesh) {
      if (den.mesh->screen) {
        std::ofstream os(dir / "screen.json");
        os << to_json(*den.mesh->screen) << '\n';
      }
      std::ofstream os(dir / "mesh.json");
      os << to_json(*den.mesh) << '\n';
    }
  }
}

}  // namespace fracbem
