#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "nrs/acceptance.hpp"
#include "nrs/io.hpp"
#include "nrs/report.hpp"
#include "nrs/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitHypothesisFail = 1;
constexpr int kExitConfigOrIo = 2;

struct ScenarioSource {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  nrs::Scenario resolve() const {
    nrs::Scenario s;
    if (!preset.empty()) {
      s = nrs::preset_scenario(preset);
    } else if (!config_path.empty()) {
      s = nrs::load_scenario_file(config_path);
    } else {
      throw nrs::ConfigError("pass --config <path> or --preset <name>");
    }
    if (seed) s.seed = *seed;
    if (!out_dir.empty()) s.out_dir = out_dir;
    return s;
  }
};

void add_source_options(CLI::App* cmd, ScenarioSource& src) {
  cmd->add_option("--config", src.config_path, "scenario config file (JSON)");
  cmd->add_option("--preset", src.preset,
                  "built-in preset (example1-stable, example1-boundary, "
                  "example1-unstable, example2-sweep, example3-sweep, equilibrium)");
  cmd->add_option("--seed", src.seed, "override the scenario seed");
  cmd->add_option("--out", src.out_dir, "override the output directory");
}

int run_check(const ScenarioSource& src) {
  const nrs::Scenario s = src.resolve();
  const nrs::Topology top = nrs::build_topology(s.W);
  const nrs::StabilityReport rep = nrs::make_stability_report(top, s.dcea);

  nrs::CheckVerdict verdict;
  verdict.spanning_tree = nrs::has_spanning_tree(top);
  verdict.hypotheses_ok = verdict.spanning_tree;
  if (!verdict.spanning_tree) {
    verdict.notes.push_back("no spanning tree rooted at the target");
  }
  if (s.dcea.order == nrs::DceaOrder::FirstOrder) {
    if (!(s.dcea.alpha < rep.alpha_beta_bound && s.dcea.beta < rep.alpha_beta_bound)) {
      verdict.hypotheses_ok = false;
      verdict.notes.push_back("alpha or beta outside the admissible interval");
    }
  } else {
    if (!(s.dcea.beta < rep.beta_cap)) {
      verdict.hypotheses_ok = false;
      verdict.notes.push_back("beta at or above the velocity-gain cap");
    } else if (!rep.h_bound || !(s.dcea.h < *rep.h_bound)) {
      verdict.hypotheses_ok = false;
      verdict.notes.push_back("h at or above the sampling-period cap");
    }
  }

  nrs::RegionEstimates reg;
  const nrs::RegionEstimates* reg_ptr = nullptr;
  if (verdict.hypotheses_ok) {
    try {
      const nrs::TargetSpec target = nrs::make_target(s.target, nrs::RobotModel::dof);
      const nrs::Disturbance dist =
          nrs::make_disturbance(s.disturbance, nrs::RobotModel::dof);
      const nrs::ModelBounds bounds =
          nrs::model_bounds(s.robots.front(), 0.0, dist.cap);
      reg = nrs::region_estimates(top, s.dcea, target, bounds, nrs::RobotModel::dof);
      reg_ptr = &reg;
      if (!reg.gain_hypotheses_ok) {
        verdict.hypotheses_ok = false;
        verdict.notes.push_back("PD gain floors not met");
      }
    } catch (const std::exception& e) {
      verdict.hypotheses_ok = false;
      verdict.notes.push_back(std::string("no error-region certificate: ") + e.what());
    }
  }

  const std::string text = nrs::format_stability_report(rep, s.dcea, verdict, reg_ptr);
  std::fputs(text.c_str(), stdout);
  const std::filesystem::path dir(s.out_dir);
  nrs::atomic_write_file(dir / "report.txt", text);
  nrs::atomic_write_file(
      dir / "report.json",
      nrs::stability_report_to_json(rep, verdict, reg_ptr).dump(2) + "\n");
  return verdict.hypotheses_ok ? kExitOk : kExitHypothesisFail;
}

int run_simulate(const ScenarioSource& src, bool expect_stable) {
  const nrs::Scenario s = src.resolve();
  const nrs::RunResult res = nrs::run_from_scenario(s);
  nrs::write_run_artifacts(s, res);
  std::printf("%s: %zu records, %zu sampling instants, diverged = %s\n",
              s.name.c_str(), res.trace.records.size(), res.trace.sample_times.size(),
              res.trace.diverged ? "yes" : "no");
  std::printf("steady window [%g, %g]: sup_e = %g, sup_edot = %g, "
              "sup_eps_bar = %g, sup_ups_bar = %g\n",
              res.metrics.window_lo, res.metrics.window_hi, res.metrics.sup_e,
              res.metrics.sup_edot, res.metrics.sup_eps_bar_inf,
              res.metrics.sup_ups_bar_inf);
  std::printf("artifacts written to %s\n", s.out_dir.c_str());
  if (expect_stable && res.trace.diverged) return kExitHypothesisFail;
  return kExitOk;
}

int run_sweep_cmd(const ScenarioSource& src, const std::string& parameter,
                  const std::vector<double>& values, int workers) {
  const nrs::Scenario s = src.resolve();
  const auto rows = nrs::run_sweep(s, parameter, values, workers);
  const std::string csv = nrs::sweep_to_csv(parameter, rows);
  nrs::atomic_write_file(std::filesystem::path(s.out_dir) / "sweep.csv", csv);
  std::fputs(csv.c_str(), stdout);
  std::printf("sweep table written to %s/sweep.csv\n", s.out_dir.c_str());
  return kExitOk;
}

int run_reproduce(const std::string& out_dir, int workers) {
  namespace fs = std::filesystem;
  const fs::path base = out_dir.empty() ? fs::path("out/examples") : fs::path(out_dir);

  {
    nrs::Scenario s = nrs::preset_scenario("example1-stable");
    s.out_dir = (base / "example1-stable").string();
    nrs::write_run_artifacts(s, nrs::run_from_scenario(s));
  }
  {
    nrs::Scenario s = nrs::preset_scenario("example2-sweep");
    const auto rows = nrs::run_sweep(s, "h", {0.05, 0.1, 0.5}, workers);
    nrs::atomic_write_file(base / "example2-sweep" / "sweep.csv",
                           nrs::sweep_to_csv("h", rows));
  }
  {
    nrs::Scenario s = nrs::preset_scenario("example3-sweep");
    const auto rows = nrs::run_sweep(s, "h", {0.1, 0.45, 0.5}, workers);
    nrs::atomic_write_file(base / "example3-sweep" / "sweep.csv",
                           nrs::sweep_to_csv("h", rows));
  }
  std::printf("example artifacts written under %s\n", base.string().c_str());

  const auto results = nrs::run_acceptance(workers);
  const bool ok = nrs::print_acceptance(results);
  return ok ? kExitOk : kExitHypothesisFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampled-interaction target tracking for networked robots: "
               "stability analysis, simulation, and parameter sweeps"};
  app.require_subcommand(1);

  ScenarioSource check_src, sim_src, sweep_src;
  bool expect_stable = false;
  std::string sweep_param;
  std::vector<double> sweep_values;
  int workers = 4;
  std::string reproduce_out;

  CLI::App* check = app.add_subcommand("check", "stability analysis and verdict");
  add_source_options(check, check_src);

  CLI::App* simulate = app.add_subcommand("simulate", "run one scenario");
  add_source_options(simulate, sim_src);
  simulate->add_flag("--expect-stable", expect_stable,
                     "exit nonzero if the run diverges");

  CLI::App* sweep = app.add_subcommand("sweep", "run one simulation per value");
  add_source_options(sweep, sweep_src);
  sweep->add_option("--param", sweep_param, "h, alpha or beta")->required();
  sweep->add_option("--values", sweep_values, "parameter values")->required();
  sweep->add_option("--workers", workers, "parallel runs");

  CLI::App* reproduce = app.add_subcommand(
      "reproduce-examples", "run the built-in examples and the verification battery");
  reproduce->add_option("--out", reproduce_out, "output directory");
  reproduce->add_option("--workers", workers, "parallel runs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return run_check(check_src);
    if (simulate->parsed()) return run_simulate(sim_src, expect_stable);
    if (sweep->parsed()) return run_sweep_cmd(sweep_src, sweep_param, sweep_values,
                                              workers);
    if (reproduce->parsed()) return run_reproduce(reproduce_out, workers);
  } catch (const nrs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigOrIo;
  } catch (const nrs::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitConfigOrIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigOrIo;
  }
  return kExitOk;
}
