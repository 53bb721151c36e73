#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fracbem/harness.hpp"
#include "json.hpp"

using namespace fracbem;

namespace {

const char* kCantorSweep = R"({
  "family": "cantor_set", "alpha": "1/3", "k": 30.0, "levels": [0, 3],
  "mesh": {"policy": "per_component", "n0": 1}, "output_dir": "harness_test_out"
})";

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

// drop the trailing wall-time column
std::string strip_seconds(const std::string& line) {
  auto pos = line.find_last_of(',');
  return line.substr(0, pos);
}

} // namespace

TEST_CASE("config parsing round trip and rejection of loose input") {
  RunConfig c = parse_config(kCantorSweep);
  CHECK(c.family == Family::cantor_set);
  CHECK(c.alpha == Rational(1, 3));
  CHECK(c.level_lo == 0);
  CHECK(c.level_hi == 3);
  CHECK(c.level == 3);
  CHECK(c.k == 30.0);
  // planar default: oblique unit direction
  CHECK(c.direction_set);
  CHECK(c.direction.x == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.direction.y == doctest::Approx(-std::sqrt(3.0) / 2).epsilon(1e-15));

  std::string echo = config_json(c);
  RunConfig c2 = parse_config(echo);
  CHECK(config_json(c2) == echo);

  CHECK_THROWS_AS(parse_config(R"({"family": "cantor_set", "alpa": "1/3"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"alpha": 0.3333})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"family": "koch_snowflake", "beta": "2/3"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"k": -3.0})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"mesh": {"policy": "per_component", "m": 2}})"), std::invalid_argument);
  CHECK(parse_config(R"({"alpha": "0.25"})").alpha == Rational(1, 4));
  CHECK(parse_config(R"({"alpha": "2/6"})").alpha == Rational(1, 3));

  RunConfig cd = parse_config(R"({"direction": [0.6, -0.8]})");
  CHECK(cd.direction.x == 0.6);
  CHECK(cd.direction.y == -0.8);
  CHECK(cd.direction.z == 0.0);

  // 3D default direction
  RunConfig c3 = parse_config(R"({"family": "cantor_dust"})");
  CHECK(c3.direction.y == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(c3.direction.z == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("level sweep over the interval family") {
  RunConfig c = parse_config(kCantorSweep);
  SweepResult lv = run_level_sweep(c);
  REQUIRE(lv.records.size() == 4);
  for (int j = 0; j <= 3; ++j) {
    const RunRecord& r = lv.records[static_cast<std::size_t>(j)];
    CHECK(r.j == j);
    CHECK(r.n == static_cast<std::size_t>(1) << j);
    CHECK(r.norm_energy > 0);
    CHECK(r.norm_near > 0);
    CHECK(r.norm_far > 0);
    CHECK(!r.warning);
    CHECK(r.family == "cantor_set");
    CHECK(r.params.find("alpha=1/3") != std::string::npos);
    CHECK(r.params.find(',') == std::string::npos);
  }
  CHECK(lv.densities.size() == 4);

  // a small dense limit truncates the sweep with a warning row
  RunConfig ct = c;
  ct.dense_limit = 4;
  SweepResult tr = run_level_sweep(ct);
  REQUIRE(tr.records.size() == 4);
  CHECK(!tr.records[2].warning);
  CHECK(tr.records[3].warning);
  CHECK(std::isnan(tr.records[3].norm_energy));
  CHECK(tr.records[3].note.find("dense solver limit") != std::string::npos);
}

TEST_CASE("error sweep measures distance to the reference level") {
  RunConfig c = parse_config(kCantorSweep);
  SweepResult er = run_error_sweep(c);
  REQUIRE(er.records.size() == 4);
  CHECK(er.records[3].err_near == 0.0);
  CHECK(er.records[3].err_far == 0.0);
  for (int j = 0; j < 3; ++j) {
    CHECK(er.records[static_cast<std::size_t>(j)].err_near > 0);
    CHECK(er.records[static_cast<std::size_t>(j)].err_far > 0);
  }

  RunConfig cr = c;
  cr.reference_level = 2;
  SweepResult er2 = run_error_sweep(cr);
  CHECK(er2.records[2].err_near == 0.0);
  CHECK(er2.records[0].err_near > 0);
  CHECK(er2.records[3].err_near > 0);
}

TEST_CASE("wavenumber sweep emits both norms and a decay fit") {
  RunConfig ck = parse_config(R"({
    "family": "cantor_dust", "alpha": "1/3", "level": 1,
    "k_list": [20.0, 30.0, 40.0], "mesh": {"policy": "per_component", "n0": 1}
  })");
  SweepResult ks = run_k_sweep(ck);
  REQUIRE(ks.records.size() == 6);
  CHECK(ks.records[0].params.find("norm=standard") != std::string::npos);
  CHECK(ks.records[1].params.find("norm=wavenumber") != std::string::npos);
  CHECK(ks.records[1].norm_energy < ks.records[0].norm_energy);
  CHECK(ks.records[0].norm_near == 0.0);
  CHECK(ks.has_fit);
  CHECK(std::isfinite(ks.fit_exponent));

  // dof-per-wavelength floor refines the mesh with k
  RunConfig ca = parse_config(R"({
    "family": "cantor_dust", "alpha": "1/3", "level": 1,
    "k_list": [20.0, 40.0], "min_dof_per_wavelength": 6,
    "mesh": {"policy": "per_component", "n0": 1}
  })");
  SweepResult ka = run_k_sweep(ca);
  REQUIRE(ka.records.size() == 4);
  CHECK(ka.records[0].n == 4 * 49);    // ceil(6*20*(1/3)/(2 pi)) = 7 per axis
  CHECK(ka.records[2].n == 4 * 169);   // ceil(6*40*(1/3)/(2 pi)) = 13 per axis
}

TEST_CASE("contraction-ratio sweep holds the level fixed") {
  RunConfig ca = parse_config(R"({
    "family": "cantor_set", "level": 2, "k": 30.0,
    "alpha_list": ["1/4", "1/3"], "mesh": {"policy": "per_component", "n0": 2}
  })");
  SweepResult as = run_alpha_sweep(ca);
  REQUIRE(as.records.size() == 2);
  CHECK(as.records[0].params.find("alpha=1/4") != std::string::npos);
  CHECK(as.records[1].params.find("alpha=1/3") != std::string::npos);
  CHECK(as.records[0].n == 8);
  CHECK(as.records[1].n == 8);
  CHECK(as.records[0].j == 2);
}

TEST_CASE("snowflake comparison interleaves inner and outer approximations") {
  RunConfig cs = parse_config(R"({
    "family": "koch_snowflake", "beta": "1/6", "k": 5.0, "levels": [0, 1],
    "mesh": {"policy": "lattice", "lattice_exponent": 2}
  })");
  SweepResult sf = run_snowflake_comparison(cs);
  REQUIRE(sf.records.size() == 3);
  CHECK(sf.records[0].n == 81);
  CHECK(sf.records[1].n == 54);
  CHECK(sf.records[2].n == 108);
  CHECK(sf.records[0].err_near == 0.0);
  CHECK(sf.records[1].err_near > 0);
  CHECK(sf.records[2].err_near > 0);
  CHECK(sf.records[1].err_near > sf.records[2].err_near);

  RunConfig shallow = cs;
  shallow.mesh.lattice_exponent = 0;
  CHECK_THROWS_AS(run_snowflake_comparison(shallow), std::invalid_argument);
}

TEST_CASE("snowflake lattice meshes at the production exponent") {
  RunConfig cs = parse_config(R"({
    "family": "koch_snowflake", "beta": "1/6",
    "mesh": {"policy": "lattice", "lattice_exponent": 4}
  })");
  const std::size_t inner[] = {6561, 8748, 9720, 10152, 10344};
  for (int j = 0; j <= 4; ++j)
    CHECK(build_snowflake_mesh(cs, SnowflakeSide::inner, j)->size() == inner[j]);
  const std::size_t outer[] = {4374, 3888, 3672, 3576};
  for (int j = 0; j <= 3; ++j)
    CHECK(build_snowflake_mesh(cs, SnowflakeSide::outer, j)->size() == outer[j]);
}

TEST_CASE("exports are stable across reruns") {
  namespace fs = std::filesystem;
  RunConfig c = parse_config(kCantorSweep);
  c.output_dir = "harness_test_out_a";
  SweepResult ra = run_error_sweep(c);
  export_outputs(c, ra);

  // rerun from the manifest's own config echo
  nlohmann::json man = nlohmann::json::parse(std::ifstream("harness_test_out_a/manifest.json"));
  RunConfig c2 = parse_config(man["config"].dump());
  c2.output_dir = "harness_test_out_b";
  SweepResult rb = run_error_sweep(c2);
  export_outputs(c2, rb);

  auto la = read_lines("harness_test_out_a/records.csv");
  auto lb = read_lines("harness_test_out_b/records.csv");
  REQUIRE(la.size() == 5);
  REQUIRE(lb.size() == 5);
  CHECK(la[0] == "family,params,j,N,h,norm_energy,norm_near,norm_far,err_near,err_far,seconds");
  for (std::size_t i = 0; i < la.size(); ++i)
    CHECK(strip_seconds(la[i]) == strip_seconds(lb[i]));

  nlohmann::json mb = nlohmann::json::parse(std::ifstream("harness_test_out_b/manifest.json"));
  CHECK(man["record_count"] == 4);
  CHECK(man.contains("lambda"));
  CHECK(man.contains("generated_at"));
  man.erase("generated_at");
  mb.erase("generated_at");
  man["config"].erase("output_dir");
  mb["config"].erase("output_dir");
  CHECK(man.dump() == mb.dump());

  fs::remove_all("harness_test_out_a");
  fs::remove_all("harness_test_out_b");
}
