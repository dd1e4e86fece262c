#include "nrs/simulate.hpp"

#include <cmath>
#include <iostream>

namespace nrs {
namespace {

bool state_ok(const Eigen::MatrixXd& M) {
  return M.allFinite() && M.cwiseAbs().maxCoeff() <= kDivergenceGuard;
}

double log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - M_LN2;
}

}  // namespace

Trace run_scenario(const Topology& top, const std::vector<RobotModel>& models,
                   const TargetSpec& target, const Disturbance& disturbance,
                   const DceaConfig& cfg, const HybridState& init, double t_end,
                   double dt, int record_stride) {
  cfg.validate();
  const int n = top.n;
  const int m = cfg.dof();
  if (init.q.rows() != n || init.q.cols() != m || init.qdot.rows() != n ||
      init.est.eps.rows() != n || init.est.eps.cols() != m) {
    throw DimensionMismatch("initial state does not match topology/config sizes");
  }
  if (models.size() != 1 && models.size() != static_cast<size_t>(n)) {
    throw DimensionMismatch("need one robot model, or one per robot");
  }
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (t_end < init.time) throw std::invalid_argument("t_end must not precede t0");
  if (record_stride < 1) throw std::invalid_argument("record_stride must be >= 1");

  const long steps_per_period = std::lround(cfg.h / dt);
  if (steps_per_period < 1 ||
      std::abs(steps_per_period * dt - cfg.h) > 1e-9 * cfg.h) {
    throw NonDividingStep("dt must divide the sampling period h");
  }

  const auto model_of = [&](int i) -> const RobotModel& {
    return models.size() == 1 ? models.front() : models[static_cast<size_t>(i)];
  };

  const double t0 = init.time;
  Eigen::MatrixXd q = init.q;
  Eigen::MatrixXd qdot = init.qdot;
  EstimatorState est = init.est;

  Trace trace;
  const double horizon = t_end - t0;
  const long estimated_records =
      horizon > 0 ? static_cast<long>(horizon / (dt * record_stride)) +
                        2 * static_cast<long>(horizon / cfg.h) + 4
                  : 4;
  trace.records.reserve(static_cast<size_t>(estimated_records));

  const auto push_record = [&](double now, RecordKind kind, const Eigen::MatrixXd& eps,
                               const Eigen::MatrixXd& ups) {
    TraceRecord rec;
    rec.time = now;
    rec.kind = kind;
    rec.q = q;
    rec.qdot = qdot;
    rec.eps = eps;
    rec.ups = ups;
    const Eigen::VectorXd p0 = target.position(now);
    const Eigen::VectorXd v0 = target.velocity(now);
    rec.e = q.rowwise() - p0.transpose();
    rec.edot = qdot.rowwise() - v0.transpose();
    rec.eps_bar = eps.rowwise() - p0.transpose();
    rec.ups_bar = ups.rowwise() - v0.transpose();
    rec.tau.resize(n, m);
    for (int i = 0; i < n; ++i) {
      rec.tau.row(i) = control_torque(cfg, i, eps.row(i), ups.row(i), q.row(i),
                                      qdot.row(i));
    }
    trace.records.push_back(std::move(rec));
  };

  push_record(t0, RecordKind::Flow, est.eps, est.ups);

  const double tiny = 1e-9 * std::max(1.0, std::abs(t_end));
  bool done = horizon <= tiny;

  for (long k = 0; !done; ++k) {
    const double tk = t0 + static_cast<double>(k) * cfg.h;
    if (tk >= t_end - tiny) break;
    // Pre-jump snapshot the whole period flows from; the estimator value
    // at offset s inside the period is eps_k + s * ups_k exactly.
    const Eigen::MatrixXd eps_k = est.eps;
    const Eigen::MatrixXd ups_k = est.ups;

    long j_max = steps_per_period;
    const bool full_period = tk + cfg.h <= t_end + tiny;
    if (!full_period) {
      j_max = static_cast<long>(std::floor((t_end - tk) / dt + 1e-9));
    }

    for (long j = 1; j <= j_max; ++j) {
      const double t_sub = tk + static_cast<double>(j - 1) * dt;
      for (int i = 0; i < n; ++i) {
        const RobotModel& model = model_of(i);
        const Eigen::Vector2d ups_i = ups_k.row(i);
        const auto deriv = [&](double tt, const Eigen::Vector4d& y) {
          const Eigen::Vector2d qi = y.head<2>();
          const Eigen::Vector2d qdi = y.tail<2>();
          const Eigen::Vector2d eps_i =
              eps_k.row(i).transpose() + (tt - tk) * ups_i;
          const Eigen::Vector2d tau =
              cfg.Kp[static_cast<size_t>(i)] * (eps_i - qi) +
              cfg.Kd[static_cast<size_t>(i)] * (ups_i - qdi);
          const Eigen::Vector2d tau_d = disturbance.torque(tt);
          Eigen::Vector4d dy;
          dy.head<2>() = qdi;
          dy.tail<2>() = forward_dynamics(model, qi, qdi, tau, tau_d);
          return dy;
        };
        Eigen::Vector4d y;
        y << q.row(i).transpose(), qdot.row(i).transpose();
        y = rk4_step(t_sub, y, dt, deriv);
        q.row(i) = y.head<2>().transpose();
        qdot.row(i) = y.tail<2>().transpose();
      }

      // Offsets are taken from the period start so the estimator flow does
      // not accumulate rounding; the last substep lands exactly on tk + h.
      const double offset =
          (j == steps_per_period) ? cfg.h : static_cast<double>(j) * dt;
      const double now = tk + offset;
      const Eigen::MatrixXd eps_now = eps_k + offset * ups_k;

      if (!state_ok(q) || !state_ok(qdot) || !state_ok(eps_now) ||
          !state_ok(ups_k)) {
        trace.diverged = true;
        est.eps = eps_now;
        push_record(now, RecordKind::Flow, eps_now, ups_k);
        done = true;
        break;
      }

      const bool is_jump = full_period && j == steps_per_period;
      if (is_jump) {
        est.eps = eps_now;
        est.ups = ups_k;
        push_record(now, RecordKind::PreJump, est.eps, est.ups);
        est = estimator_jump(top, cfg, est, target.position(now),
                             target.velocity(now));
        trace.sample_times.push_back(now);
        push_record(now, RecordKind::PostJump, est.eps, est.ups);
        if (now >= t_end - tiny) done = true;
      } else if (j % record_stride == 0 || j == j_max) {
        push_record(now, RecordKind::Flow, eps_now, ups_k);
        if (j == j_max && !full_period) {
          est.eps = eps_now;
          done = true;
        }
      }
    }
    if (!full_period) done = true;
  }
  return trace;
}

Metrics metrics(const Trace& trace, double window_fraction) {
  if (trace.records.empty()) throw EmptyWindow("trace has no records");
  if (!(window_fraction > 0.0) || window_fraction > 1.0) {
    throw std::invalid_argument("window_fraction must lie in (0,1]");
  }
  const double t_first = trace.records.front().time;
  const double t_last = trace.records.back().time;
  Metrics out;
  out.window_hi = t_last;
  out.window_lo = t_last - window_fraction * (t_last - t_first);
  out.diverged = trace.diverged;

  bool any = false;
  for (const auto& rec : trace.records) {
    if (rec.time < out.window_lo - 1e-12) continue;
    any = true;
    for (Eigen::Index i = 0; i < rec.q.rows(); ++i) {
      out.sup_e = std::max(out.sup_e, rec.e.row(i).norm());
      out.sup_edot = std::max(out.sup_edot, rec.edot.row(i).norm());
      out.sup_eps_bar_inf =
          std::max(out.sup_eps_bar_inf, rec.eps_bar.row(i).cwiseAbs().maxCoeff());
      out.sup_ups_bar_inf =
          std::max(out.sup_ups_bar_inf, rec.ups_bar.row(i).cwiseAbs().maxCoeff());
    }
  }
  if (!any) throw EmptyWindow("no records inside the requested window");
  return out;
}

std::vector<double> lyapunov_diagnostic(const Trace& trace, int robot,
                                        const RobotModel& model,
                                        const DceaConfig& cfg) {
  const Eigen::MatrixXd& Kp = cfg.Kp.at(static_cast<size_t>(robot));
  const Eigen::MatrixXd& Kd = cfg.Kd.at(static_cast<size_t>(robot));
  const ModelBounds bounds = model_bounds(model, 0.0, 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Kp);
  if (es.eigenvalues().minCoeff() < 2.0 * bounds.lambda_M) {
    std::cerr << "lyapunov_diagnostic: lambda_min(Kp) < 2 lambda_M; "
                 "V is not guaranteed positive definite\n";
  }

  std::vector<double> values;
  values.reserve(trace.records.size());
  for (const auto& rec : trace.records) {
    const Eigen::Vector2d e = rec.e.row(robot);
    const Eigen::Vector2d ed = rec.edot.row(robot);
    const Eigen::Vector2d qi = rec.q.row(robot);
    const Eigen::Matrix2d M = mass_matrix(model, qi);
    const Eigen::Vector2d tanh_e = e.array().tanh();
    const Eigen::Vector2d lc(log_cosh(e(0)), log_cosh(e(1)));
    const double v = 0.5 * ed.dot(M * ed) + ed.dot(M * tanh_e) +
                     0.5 * e.dot(Kp * e) + (Kd * lc).cwiseAbs().sum();
    values.push_back(v);
  }
  return values;
}

double measured_convergence_order(double dt_coarse, double dt_fine) {
  if (!(dt_coarse > 0) || !(dt_fine > 0) || dt_fine >= dt_coarse) {
    throw std::invalid_argument("need dt_fine < dt_coarse, both positive");
  }
  // Forced oscillator xddot = -4 x + cos t, x(0) = 1, xdot(0) = 0:
  //   x(t) = (2/3) cos 2t + (1/3) cos t.
  const auto deriv = [](double t, const Eigen::Vector2d& y) {
    return Eigen::Vector2d(y(1), -4.0 * y(0) + std::cos(t)).eval();
  };
  const auto exact = [](double t) {
    return Eigen::Vector2d(2.0 / 3.0 * std::cos(2.0 * t) + std::cos(t) / 3.0,
                           -4.0 / 3.0 * std::sin(2.0 * t) - std::sin(t) / 3.0)
        .eval();
  };
  const double t_end = 2.0;
  const auto run = [&](double dt) {
    Eigen::Vector2d y(1.0, 0.0);
    const long steps = std::lround(t_end / dt);
    for (long k = 0; k < steps; ++k) {
      y = rk4_step(static_cast<double>(k) * dt, y, dt, deriv);
    }
    return (y - exact(static_cast<double>(steps) * dt)).norm();
  };
  const double e_coarse = run(dt_coarse);
  const double e_fine = run(dt_fine);
  if (e_coarse < 1e-14 || e_fine < 1e-14) {
    throw std::invalid_argument("errors below floating-point resolution");
  }
  return std::log(e_coarse / e_fine) / std::log(dt_coarse / dt_fine);
}

double integrator_order_check() { return measured_convergence_order(1e-2, 5e-3); }

Eigen::VectorXd stack_error_state(const Eigen::MatrixXd& eps_bar,
                                  const Eigen::MatrixXd& ups_bar) {
  const Eigen::Index n = eps_bar.rows();
  const Eigen::Index m = eps_bar.cols();
  Eigen::VectorXd x(2 * n * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.segment(i * m, m) = eps_bar.row(i).transpose();
    x.segment(n * m + i * m, m) = ups_bar.row(i).transpose();
  }
  return x;
}

}  // namespace nrs
