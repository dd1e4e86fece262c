#pragma once

#include <string>
#include <vector>

#include "nrs/scenario.hpp"
#include "nrs/simulate.hpp"
#include "nrs/stability.hpp"

namespace nrs {

/// CSV with one row per robot per record:
/// time,kind,robot,q1..qm,qd1..qdm,eps1..epsm,ups1..upsm,e_norm2,edot_norm2
std::string trace_to_csv(const Trace& trace);

std::string metrics_to_json_string(const Metrics& metrics);

std::string sweep_to_csv(const std::string& parameter, const std::vector<SweepRow>& rows);

/// Plot-ready columns, full precision: estimator components, velocity
/// estimate components, and per-robot tracking-error norms over time.
std::string plot_eps_csv(const Trace& trace);
std::string plot_ups_csv(const Trace& trace);
std::string plot_error_norm_csv(const Trace& trace);
std::string plot_velocity_error_norm_csv(const Trace& trace);

struct CheckVerdict {
  bool spanning_tree = false;
  bool hypotheses_ok = false;  // everything the configured order requires
  std::vector<std::string> notes;
};

std::string format_stability_report(const StabilityReport& rep, const DceaConfig& cfg,
                                    const CheckVerdict& verdict,
                                    const RegionEstimates* reg);
nlohmann::json stability_report_to_json(const StabilityReport& rep,
                                        const CheckVerdict& verdict,
                                        const RegionEstimates* reg);

/// Writes scenario.json, trace.csv, metrics.json and the plot files into
/// result.out_dir (all atomically).
void write_run_artifacts(const Scenario& scenario, const RunResult& result);

}  // namespace nrs
