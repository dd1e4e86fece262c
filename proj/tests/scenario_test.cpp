#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nrs/io.hpp"
#include "nrs/report.hpp"
#include "nrs/scenario.hpp"

using namespace nrs;

TEST_CASE("presets resolve and validate") {
  for (const auto& name : preset_names()) {
    const Scenario s = preset_scenario(name);
    CHECK(s.name == name);
    const Topology top = build_topology(s.W);
    CHECK(has_spanning_tree(top));
    CHECK_NOTHROW(s.dcea.validate());
    CHECK_NOTHROW(make_target(s.target, RobotModel::dof));
    CHECK_NOTHROW(make_disturbance(s.disturbance, RobotModel::dof));
    CHECK_NOTHROW(make_initial_state(s, top));
  }
  CHECK_THROWS_AS(preset_scenario("no-such-preset"), ConfigError);
}

TEST_CASE("scenario round-trips through json") {
  for (const auto& name : preset_names()) {
    const Scenario s = preset_scenario(name);
    const Scenario re = scenario_from_json(scenario_to_json(s));
    CHECK(re == s);
    const Scenario re2 = scenario_from_json(scenario_to_json(re));
    CHECK(re2 == re);
  }
}

TEST_CASE("scenario file save/load round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "nrs_scenario_test";
  fs::create_directories(dir);
  const std::string path = (dir / "scn.json").string();
  const Scenario s = preset_scenario("example1-stable");
  save_scenario_file(s, path);
  const Scenario re = load_scenario_file(path);
  CHECK(re == s);
  fs::remove_all(dir);
}

TEST_CASE("config errors carry the offending field") {
  nlohmann::json j = scenario_to_json(preset_scenario("example1-stable"));
  j.erase("dcea");
  try {
    scenario_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("dcea") != std::string::npos);
  }

  nlohmann::json j2 = scenario_to_json(preset_scenario("example1-stable"));
  j2["dcea"]["alpha"] = "not-a-number";
  CHECK_THROWS_AS(scenario_from_json(j2), ConfigError);

  nlohmann::json j3 = scenario_to_json(preset_scenario("example1-stable"));
  j3["topology"] = {{"matrix", {{0.0, 1.0}, {1.0}}}};
  CHECK_THROWS_AS(scenario_from_json(j3), ConfigError);

  CHECK_THROWS_AS(load_scenario_file("/nonexistent/path.json"), ConfigError);
}

TEST_CASE("scalar gains expand to identity multiples") {
  nlohmann::json j = scenario_to_json(preset_scenario("example1-stable"));
  j["dcea"]["kp"] = 150.0;
  const Scenario s = scenario_from_json(j);
  CHECK(s.dcea.Kp.size() == 6);
  CHECK((s.dcea.Kp[3] - 150.0 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("initial draws are seeded and ranged") {
  const Scenario s = preset_scenario("example1-stable");
  const Topology top = build_topology(s.W);
  const HybridState a = make_initial_state(s, top);
  const HybridState b = make_initial_state(s, top);
  CHECK((a.q.array() == b.q.array()).all());
  CHECK((a.est.ups.array() == b.est.ups.array()).all());
  CHECK(a.q.cwiseAbs().maxCoeff() <= 25.0);
  CHECK(a.est.eps.cwiseAbs().maxCoeff() <= 25.0);

  Scenario other = s;
  other.seed = 99;
  const HybridState c = make_initial_state(other, top);
  CHECK_FALSE((a.q.array() == c.q.array()).all());
}

TEST_CASE("atomic write replaces content without leaving temp files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "nrs_io_test";
  fs::remove_all(dir);
  const fs::path file = dir / "sub" / "data.txt";
  atomic_write_file(file, "one\n");
  atomic_write_file(file, "two\n");
  std::ifstream in(file);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  CHECK(content == "two\n");
  int entries = 0;
  for (const auto& p : fs::directory_iterator(file.parent_path())) {
    (void)p;
    ++entries;
  }
  CHECK(entries == 1);
  fs::remove_all(dir);
}

TEST_CASE("trace csv schema") {
  Scenario s = preset_scenario("equilibrium");
  s.t_end = 0.5;
  s.record_stride = 50;
  const RunResult res = run_from_scenario(s);
  const std::string csv = trace_to_csv(res.trace);
  const std::string header = csv.substr(0, csv.find('\n'));
  CHECK(header ==
        "time,kind,robot,q1,q2,qd1,qd2,eps1,eps2,ups1,ups2,e_norm2,edot_norm2");
  CHECK(csv.find("pre_jump") != std::string::npos);
  CHECK(csv.find("post_jump") != std::string::npos);
  CHECK(csv.find("flow") != std::string::npos);
}

TEST_CASE("sweep validation and table layout") {
  const Scenario base = preset_scenario("equilibrium");
  CHECK_THROWS_AS(run_sweep(base, "gamma", {0.1}, 1), ConfigError);
  CHECK_THROWS_AS(run_sweep(base, "h", {}, 1), ConfigError);
  CHECK_THROWS_AS(run_sweep(base, "h", {-0.1}, 1), ConfigError);

  const auto rows = run_sweep(base, "alpha", {0.3, 0.6}, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].error.empty());
  CHECK(rows[1].error.empty());
  CHECK_FALSE(rows[0].metrics.diverged);
  const std::string csv = sweep_to_csv("alpha", rows);
  CHECK(csv.substr(0, csv.find('\n')) ==
        "alpha,sup_e,sup_edot,sup_eps_bar_inf,sup_ups_bar_inf,diverged,delta1,"
        "delta2,error");
}

TEST_CASE("sweep snaps the substep to divide each h") {
  Scenario base = preset_scenario("equilibrium");
  base.t_end = 1.0;
  // 0.07 is not a multiple of the preset dt; the sweep must still run.
  const auto rows = run_sweep(base, "h", {0.07, 0.1}, 2);
  CHECK(rows[0].error.empty());
  CHECK(rows[1].error.empty());
}

TEST_CASE("run artifacts land in the output directory") {
  namespace fs = std::filesystem;
  Scenario s = preset_scenario("equilibrium");
  s.t_end = 0.5;
  const fs::path dir = fs::temp_directory_path() / "nrs_artifacts_test";
  fs::remove_all(dir);
  s.out_dir = dir.string();
  write_run_artifacts(s, run_from_scenario(s));
  for (const char* f : {"scenario.json", "trace.csv", "metrics.json", "plot_eps.csv",
                        "plot_ups.csv", "plot_e_norm.csv", "plot_edot_norm.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  const Scenario echoed = load_scenario_file((dir / "scenario.json").string());
  CHECK(echoed == s);
  fs::remove_all(dir);
}
