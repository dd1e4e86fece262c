#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrs/dcea.hpp"
#include "nrs/models.hpp"
#include "nrs/simulate.hpp"
#include "nrs/stability.hpp"
#include "nrs/topology.hpp"

namespace nrs {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reference trajectory selection. Sinusoid means componentwise
/// p_j(t) = offset_j + slope_j t + amp_j sin(omega_j t + phase_j).
struct TargetConfig {
  enum class Kind { PaperExample, Static, Sinusoid };
  Kind kind = Kind::PaperExample;
  Eigen::VectorXd position;  // Static
  Eigen::VectorXd offset, slope, amp, omega, phase;  // Sinusoid
};

struct DisturbanceConfig {
  enum class Kind { None, PaperExample };
  Kind kind = Kind::PaperExample;
};

struct InitConfig {
  enum class Kind { UniformRandom, Explicit };
  Kind kind = Kind::UniformRandom;
  double lo = -25.0;
  double hi = 25.0;
  Eigen::MatrixXd q, qdot, eps, ups;  // Explicit
};

/// One runnable experiment: everything a run needs, in plain data so a
/// parsed scenario serializes back to an equivalent record.
struct Scenario {
  std::string name = "scenario";
  Eigen::MatrixXd W;
  std::vector<RobotModel> robots;  // one entry = shared by all robots
  TargetConfig target;
  DisturbanceConfig disturbance;
  InitConfig init;
  DceaConfig dcea;
  double t_end = 50.0;
  double dt = 4e-4;
  int record_stride = 5;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
};

bool operator==(const RobotModel& a, const RobotModel& b);
bool operator==(const TargetConfig& a, const TargetConfig& b);
bool operator==(const DisturbanceConfig& a, const DisturbanceConfig& b);
bool operator==(const InitConfig& a, const InitConfig& b);
bool operator==(const DceaConfig& a, const DceaConfig& b);
bool operator==(const Scenario& a, const Scenario& b);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);

/// Parses a scenario file; ConfigError messages carry the offending field.
Scenario load_scenario_file(const std::string& path);
void save_scenario_file(const Scenario& s, const std::string& path);

/// The six-robot interaction matrix used by all built-in presets.
Eigen::MatrixXd paper_topology_matrix();

/// Built-in presets: example1-stable, example1-boundary, example1-unstable,
/// example2-sweep, example3-sweep, equilibrium.
Scenario preset_scenario(const std::string& name);
std::vector<std::string> preset_names();

TargetSpec make_target(const TargetConfig& cfg, int m);
Disturbance make_disturbance(const DisturbanceConfig& cfg, int m);

/// Initial state; UniformRandom draws all of q, qdot, eps, ups
/// entrywise from [lo, hi] with a run-reproducible generator.
HybridState make_initial_state(const Scenario& s, const Topology& top);

struct RunResult {
  Trace trace;
  Metrics metrics;
};

RunResult run_from_scenario(const Scenario& s, double window_fraction = 0.2);

struct SweepRow {
  double value = 0;
  Metrics metrics;
  double delta1 = std::numeric_limits<double>::quiet_NaN();
  double delta2 = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // empty on success
};

/// Runs one simulation per value of parameter ("h", "alpha" or "beta"),
/// parallel up to `workers`. Per-point failures land in SweepRow::error.
/// For an h sweep the substep is re-snapped so it divides each h.
std::vector<SweepRow> run_sweep(const Scenario& base, const std::string& parameter,
                                const std::vector<double>& values, int workers,
                                double window_fraction = 0.2);

}  // namespace nrs
