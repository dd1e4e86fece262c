#include "nrs/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "nrs/io.hpp"

namespace nrs {
namespace {

const char* kind_name(RecordKind k) {
  switch (k) {
    case RecordKind::Flow:
      return "flow";
    case RecordKind::PreJump:
      return "pre_jump";
    case RecordKind::PostJump:
      return "post_jump";
  }
  return "?";
}

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string trace_to_csv(const Trace& trace) {
  std::string out;
  const int m = trace.records.empty() ? 0 : static_cast<int>(trace.records[0].q.cols());
  out += "time,kind,robot";
  for (const char* stem : {"q", "qd", "eps", "ups"}) {
    for (int j = 1; j <= m; ++j) {
      out += ',';
      out += stem;
      out += std::to_string(j);
    }
  }
  out += ",e_norm2,edot_norm2\n";
  for (const auto& rec : trace.records) {
    for (Eigen::Index i = 0; i < rec.q.rows(); ++i) {
      append_number(out, rec.time);
      out += ',';
      out += kind_name(rec.kind);
      out += ',';
      out += std::to_string(i + 1);
      for (const Eigen::MatrixXd* M : {&rec.q, &rec.qdot, &rec.eps, &rec.ups}) {
        for (int j = 0; j < m; ++j) {
          out += ',';
          append_number(out, (*M)(i, j));
        }
      }
      out += ',';
      append_number(out, rec.e.row(i).norm());
      out += ',';
      append_number(out, rec.edot.row(i).norm());
      out += '\n';
    }
  }
  return out;
}

std::string metrics_to_json_string(const Metrics& m) {
  nlohmann::json j{{"window_lo", m.window_lo},
                   {"window_hi", m.window_hi},
                   {"sup_e", m.sup_e},
                   {"sup_edot", m.sup_edot},
                   {"sup_eps_bar_inf", m.sup_eps_bar_inf},
                   {"sup_ups_bar_inf", m.sup_ups_bar_inf},
                   {"diverged", m.diverged}};
  return j.dump(2) + "\n";
}

std::string sweep_to_csv(const std::string& parameter,
                         const std::vector<SweepRow>& rows) {
  std::string out = parameter +
                    ",sup_e,sup_edot,sup_eps_bar_inf,sup_ups_bar_inf,diverged,"
                    "delta1,delta2,error\n";
  for (const auto& r : rows) {
    append_number(out, r.value);
    out += ',';
    append_number(out, r.metrics.sup_e);
    out += ',';
    append_number(out, r.metrics.sup_edot);
    out += ',';
    append_number(out, r.metrics.sup_eps_bar_inf);
    out += ',';
    append_number(out, r.metrics.sup_ups_bar_inf);
    out += ',';
    out += r.metrics.diverged ? "true" : "false";
    out += ',';
    append_number(out, r.delta1);
    out += ',';
    append_number(out, r.delta2);
    out += ',';
    out += r.error;
    out += '\n';
  }
  return out;
}

namespace {

std::string component_csv(const Trace& trace, const Eigen::MatrixXd TraceRecord::*field,
                          const std::string& stem) {
  std::string out = "time";
  if (!trace.records.empty()) {
    const auto& first = trace.records.front();
    for (Eigen::Index i = 0; i < first.q.rows(); ++i) {
      for (Eigen::Index j = 0; j < first.q.cols(); ++j) {
        out += ',' + stem + '_' + std::to_string(i + 1) + '_' + std::to_string(j + 1);
      }
    }
  }
  out += '\n';
  for (const auto& rec : trace.records) {
    append_number(out, rec.time);
    const Eigen::MatrixXd& M = rec.*field;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      for (Eigen::Index j = 0; j < M.cols(); ++j) {
        out += ',';
        append_number(out, M(i, j));
      }
    }
    out += '\n';
  }
  return out;
}

std::string norm_csv(const Trace& trace, const Eigen::MatrixXd TraceRecord::*field,
                     const std::string& stem) {
  std::string out = "time";
  if (!trace.records.empty()) {
    for (Eigen::Index i = 0; i < trace.records.front().q.rows(); ++i) {
      out += ',' + stem + '_' + std::to_string(i + 1);
    }
  }
  out += '\n';
  for (const auto& rec : trace.records) {
    append_number(out, rec.time);
    const Eigen::MatrixXd& M = rec.*field;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      out += ',';
      append_number(out, M.row(i).norm());
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string plot_eps_csv(const Trace& trace) {
  return component_csv(trace, &TraceRecord::eps, "eps");
}
std::string plot_ups_csv(const Trace& trace) {
  return component_csv(trace, &TraceRecord::ups, "ups");
}
std::string plot_error_norm_csv(const Trace& trace) {
  return norm_csv(trace, &TraceRecord::e, "e");
}
std::string plot_velocity_error_norm_csv(const Trace& trace) {
  return norm_csv(trace, &TraceRecord::edot, "edot");
}

std::string format_stability_report(const StabilityReport& rep, const DceaConfig& cfg,
                                    const CheckVerdict& verdict,
                                    const RegionEstimates* reg) {
  std::ostringstream out;
  out.precision(10);
  out << "spanning tree rooted at the target: "
      << (verdict.spanning_tree ? "yes" : "NO") << "\n";
  out << "spectrum of D:\n";
  for (Eigen::Index i = 0; i < rep.spectrum.size(); ++i) {
    out << "  s_" << (i + 1) << " = " << rep.spectrum(i).real();
    if (rep.spectrum(i).imag() != 0.0) out << " + " << rep.spectrum(i).imag() << "i";
    out << "   |s| = " << std::abs(rep.spectrum(i)) << "\n";
  }
  out << "admissible interval: 0 < alpha, beta < " << rep.alpha_beta_bound << "\n";
  out << "theta_i = Re 2/(1-s_i):";
  for (double v : rep.theta) out << ' ' << v;
  out << "\nvartheta_i = Im 2/(1-s_i):";
  for (double v : rep.vartheta) out << ' ' << v;
  out << "\nvelocity-gain cap: beta < " << rep.beta_cap << "\n";
  out << "configured: order = "
      << (cfg.order == DceaOrder::FirstOrder ? "first" : "second")
      << ", alpha = " << cfg.alpha << ", beta = " << cfg.beta << ", h = " << cfg.h
      << "\n";
  if (rep.h_bound) {
    out << "second-order sampling cap: 0 < h < " << *rep.h_bound << "\n";
  }
  out << "Schur(Lambda) = " << (rep.schur_Lambda ? "yes" : "no")
      << ", Schur(Gamma) = " << (rep.schur_Gamma ? "yes" : "no") << "\n";
  if (reg != nullptr) {
    out << "error-region certificates:\n";
    if (reg->kappa3 > 0) {
      out << "  kappa3 = " << reg->kappa3 << "\n";
    } else {
      out << "  kappa1 = " << reg->kappa1 << ", kappa2 = " << reg->kappa2 << "\n";
    }
    out << "  estimator radii: delta1 = " << reg->delta1
        << ", delta2 = " << reg->delta2 << "\n";
    if (reg->kappa3 > 0) {
      out << "  tracking radii: delta5 = " << reg->delta5
          << ", delta6 = " << reg->delta6 << "\n";
    } else {
      out << "  tracking radii: delta3 = " << reg->delta3
          << ", delta4 = " << reg->delta4 << "\n";
    }
    out << "  gain hypotheses: " << (reg->gain_hypotheses_ok ? "satisfied" : "NOT met")
        << "\n";
  }
  for (const auto& note : verdict.notes) out << "note: " << note << "\n";
  out << "verdict: " << (verdict.hypotheses_ok ? "parameters admissible"
                                               : "parameters NOT admissible")
      << "\n";
  return out.str();
}

nlohmann::json stability_report_to_json(const StabilityReport& rep,
                                        const CheckVerdict& verdict,
                                        const RegionEstimates* reg) {
  nlohmann::json j;
  nlohmann::json spec = nlohmann::json::array();
  for (Eigen::Index i = 0; i < rep.spectrum.size(); ++i) {
    spec.push_back({{"re", rep.spectrum(i).real()}, {"im", rep.spectrum(i).imag()}});
  }
  j["spectrum"] = spec;
  j["alpha_beta_bound"] = rep.alpha_beta_bound;
  j["theta"] = rep.theta;
  j["vartheta"] = rep.vartheta;
  j["beta_cap"] = rep.beta_cap;
  if (rep.h_bound) j["h_bound"] = *rep.h_bound;
  j["schur_Lambda"] = rep.schur_Lambda;
  j["schur_Gamma"] = rep.schur_Gamma;
  j["spanning_tree"] = verdict.spanning_tree;
  j["hypotheses_ok"] = verdict.hypotheses_ok;
  j["notes"] = verdict.notes;
  if (reg != nullptr) {
    j["region"] = {{"kappa1", reg->kappa1},     {"kappa2", reg->kappa2},
                   {"kappa3", reg->kappa3},     {"delta1", reg->delta1},
                   {"delta2", reg->delta2},     {"delta3", reg->delta3},
                   {"delta4", reg->delta4},     {"delta5", reg->delta5},
                   {"delta6", reg->delta6},     {"gain_ok", reg->gain_hypotheses_ok}};
  }
  return j;
}

void write_run_artifacts(const Scenario& scenario, const RunResult& result) {
  namespace fs = std::filesystem;
  const fs::path dir(scenario.out_dir);
  save_scenario_file(scenario, (dir / "scenario.json").string());
  atomic_write_file(dir / "trace.csv", trace_to_csv(result.trace));
  atomic_write_file(dir / "metrics.json", metrics_to_json_string(result.metrics));
  atomic_write_file(dir / "plot_eps.csv", plot_eps_csv(result.trace));
  atomic_write_file(dir / "plot_ups.csv", plot_ups_csv(result.trace));
  atomic_write_file(dir / "plot_e_norm.csv", plot_error_norm_csv(result.trace));
  atomic_write_file(dir / "plot_edot_norm.csv",
                    plot_velocity_error_norm_csv(result.trace));
}

}  // namespace nrs
