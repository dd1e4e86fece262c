#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrs/dcea.hpp"
#include "nrs/models.hpp"
#include "nrs/topology.hpp"

namespace nrs {

struct NonDividingStep : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyWindow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// State norms above this trip the divergence guard and stop the run.
constexpr double kDivergenceGuard = 1e9;

/// Joint state of all robots plus all estimators at one instant.
/// Matrices are n x m with row i belonging to robot i.
struct HybridState {
  double time = 0;
  Eigen::MatrixXd q;
  Eigen::MatrixXd qdot;
  EstimatorState est;
};

enum class RecordKind { Flow, PreJump, PostJump };

/// One sampled point of a run. e/edot are the tracking errors against the
/// target, eps_bar/ups_bar the estimator errors; tau is the applied torque.
struct TraceRecord {
  double time = 0;
  RecordKind kind = RecordKind::Flow;
  Eigen::MatrixXd q, qdot, eps, ups, tau;
  Eigen::MatrixXd e, edot, eps_bar, ups_bar;
};

/// Time-ordered run record. Every sampling time in (t0, t_end] appears
/// exactly twice: once as the left limit (PreJump) and once after the
/// impulsive update (PostJump). metadata carries the scenario echo when
/// the run came from a config.
struct Trace {
  std::vector<double> sample_times;
  std::vector<TraceRecord> records;
  bool diverged = false;
  std::string metadata;
};

struct Metrics {
  double window_lo = 0;
  double window_hi = 0;
  double sup_e = 0;
  double sup_edot = 0;
  double sup_eps_bar_inf = 0;
  double sup_ups_bar_inf = 0;
  bool diverged = false;
};

/// Classical fixed-step fourth-order step; shared by the simulator and the
/// convergence-order check.
template <typename State, typename Deriv>
State rk4_step(double t, const State& y, double dt, Deriv&& f) {
  const State k1 = f(t, y);
  const State k2 = f(t + dt / 2.0, State(y + (dt / 2.0) * k1));
  const State k3 = f(t + dt / 2.0, State(y + (dt / 2.0) * k2));
  const State k4 = f(t + dt, State(y + dt * k3));
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrates the closed loop: robots flow under the PD torque (recomputed
/// at every integrator stage), estimators flow exactly, and the configured
/// impulsive update fires at every t_k = t0 + k h for k >= 1 on the
/// left-limit state; there is no jump at t0. dt must divide h. Only every
/// record_stride-th interior flow point is recorded; jump pairs are always
/// recorded. The run stops early, with diverged set, once any state norm
/// passes the guard.
///
/// `models` holds either one entry per robot or a single entry shared by
/// all robots.
Trace run_scenario(const Topology& top, const std::vector<RobotModel>& models,
                   const TargetSpec& target, const Disturbance& disturbance,
                   const DceaConfig& cfg, const HybridState& init, double t_end,
                   double dt, int record_stride = 1);

/// Sups of ||e_i||_2, ||edot_i||_2, ||eps_bar_i||_inf, ||ups_bar_i||_inf
/// over the final window_fraction of the trace span, maximized over robots.
Metrics metrics(const Trace& trace, double window_fraction);

/// V_i = 1/2 edot' M edot + edot' M tanh(e) + 1/2 e' Kp e
///       + || Kd ln(cosh e) ||_1 at every record.
std::vector<double> lyapunov_diagnostic(const Trace& trace, int robot,
                                        const RobotModel& model, const DceaConfig& cfg);

/// Observed convergence order of the integrator on a forced linear
/// oscillator with a closed-form solution, from one halving of the step.
double measured_convergence_order(double dt_coarse, double dt_fine);
double integrator_order_check();

/// col(eps_bar rows, ups_bar rows) as one 2nm vector, matching the
/// Kronecker layout of the transition matrices.
Eigen::VectorXd stack_error_state(const Eigen::MatrixXd& eps_bar,
                                  const Eigen::MatrixXd& ups_bar);

}  // namespace nrs
