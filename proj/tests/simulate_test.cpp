#include <doctest.h>

#include <random>

#include "nrs/report.hpp"
#include "nrs/scenario.hpp"
#include "nrs/simulate.hpp"

using namespace nrs;

namespace {

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("equilibrium stays put") {
  const RunResult res = run_from_scenario(preset_scenario("equilibrium"));
  CHECK_FALSE(res.metrics.diverged);
  CHECK(res.metrics.sup_e <= 1e-9);
  CHECK(res.metrics.sup_edot <= 1e-9);
  CHECK(res.metrics.sup_eps_bar_inf <= 1e-9);
  CHECK(res.metrics.sup_ups_bar_inf <= 1e-9);
}

TEST_CASE("dt must divide the sampling period") {
  Scenario s = preset_scenario("equilibrium");
  s.dt = 0.03;  // h = 0.1
  CHECK_THROWS_AS(run_from_scenario(s), NonDividingStep);
}

TEST_CASE("runs are deterministic") {
  Scenario s = preset_scenario("example1-stable");
  s.t_end = 2.0;
  s.record_stride = 1;
  const RunResult a = run_from_scenario(s);
  const RunResult b = run_from_scenario(s);
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (size_t k = 0; k < a.trace.records.size(); ++k) {
    const TraceRecord& ra = a.trace.records[k];
    const TraceRecord& rb = b.trace.records[k];
    CHECK(ra.time == rb.time);
    CHECK(ra.kind == rb.kind);
    CHECK(bitwise_equal(ra.q, rb.q));
    CHECK(bitwise_equal(ra.qdot, rb.qdot));
    CHECK(bitwise_equal(ra.eps, rb.eps));
    CHECK(bitwise_equal(ra.ups, rb.ups));
  }
}

TEST_CASE("jump bookkeeping: exactly two records per sampling time") {
  Scenario s = preset_scenario("example1-stable");
  s.t_end = 1.0;
  s.record_stride = 1;
  const RunResult res = run_from_scenario(s);
  REQUIRE(res.trace.sample_times.size() == 10);
  for (const double tk : res.trace.sample_times) {
    std::vector<const TraceRecord*> at;
    for (const auto& rec : res.trace.records) {
      if (rec.time == tk) at.push_back(&rec);
    }
    REQUIRE(at.size() == 2);
    CHECK(at[0]->kind == RecordKind::PreJump);
    CHECK(at[1]->kind == RecordKind::PostJump);
    // The robot state does not jump.
    CHECK(bitwise_equal(at[0]->q, at[1]->q));
    CHECK(bitwise_equal(at[0]->qdot, at[1]->qdot));
    // The first-order update moves both estimates.
    CHECK_FALSE(bitwise_equal(at[0]->eps, at[1]->eps));
    CHECK_FALSE(bitwise_equal(at[0]->ups, at[1]->ups));
  }
}

TEST_CASE("second-order runs keep eps continuous across jumps") {
  Scenario s = preset_scenario("example3-sweep");
  s.t_end = 3.0;
  s.dcea.h = 0.45;
  s.record_stride = 100;
  const RunResult res = run_from_scenario(s);
  int pairs = 0;
  for (size_t k = 0; k + 1 < res.trace.records.size(); ++k) {
    const TraceRecord& pre = res.trace.records[k];
    const TraceRecord& post = res.trace.records[k + 1];
    if (pre.kind == RecordKind::PreJump) {
      REQUIRE(post.kind == RecordKind::PostJump);
      CHECK(bitwise_equal(pre.eps, post.eps));
      CHECK_FALSE(bitwise_equal(pre.ups, post.ups));
      ++pairs;
    }
  }
  CHECK(pairs == 6);
}

TEST_CASE("divergence guard stops the run early") {
  Scenario s = preset_scenario("example1-stable");
  s.dcea.alpha = 3.0;  // far outside the admissible interval
  s.dcea.beta = 3.0;
  s.t_end = 50.0;
  const RunResult res = run_from_scenario(s, 1.0);
  CHECK(res.trace.diverged);
  CHECK(res.metrics.diverged);
  CHECK(res.trace.records.back().time < 10.0);
}

TEST_CASE("stable example preset settles into a small neighborhood") {
  const RunResult res = run_from_scenario(preset_scenario("example1-stable"));
  CHECK_FALSE(res.trace.diverged);
  const double initial = res.trace.records.front().eps_bar.cwiseAbs().maxCoeff();
  CHECK(res.metrics.sup_eps_bar_inf < 0.05 * initial);
  CHECK(res.metrics.sup_e < 5.0);
}

TEST_CASE("metrics windowing and validation") {
  Trace empty;
  CHECK_THROWS_AS(metrics(empty, 0.2), EmptyWindow);

  Scenario s = preset_scenario("equilibrium");
  s.t_end = 1.0;
  const RunResult res = run_from_scenario(s);
  CHECK_THROWS_AS(metrics(res.trace, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(metrics(res.trace, 1.5), std::invalid_argument);
  const Metrics m = metrics(res.trace, 0.5);
  CHECK(m.window_lo == doctest::Approx(0.5));
  CHECK(m.window_hi == doctest::Approx(1.0));
}

TEST_CASE("integrator order") {
  const double order = integrator_order_check();
  CHECK(order >= 3.8);
  CHECK(order <= 4.2);
  CHECK_THROWS_AS(measured_convergence_order(1e-2, 1e-2), std::invalid_argument);
  CHECK_THROWS_AS(measured_convergence_order(0.0, 1e-3), std::invalid_argument);
}

TEST_CASE("free manipulator energy drift shrinks at fourth order") {
  RobotModel model;
  model.gravity_accel = 0.0;
  const auto drift = [&](double dt) {
    Eigen::Vector4d y;
    y << 0.3, -0.2, 1.0, -0.5;
    const auto deriv = [&](double, const Eigen::Vector4d& s) {
      Eigen::Vector4d d;
      d.head<2>() = s.tail<2>();
      d.tail<2>() = forward_dynamics(model, s.head<2>(), s.tail<2>(),
                                     Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero());
      return d;
    };
    const auto energy = [&](const Eigen::Vector4d& s) {
      const Eigen::Vector2d qd = s.tail<2>();
      return 0.5 * qd.dot(mass_matrix(model, s.head<2>()) * qd);
    };
    const double e0 = energy(y);
    double worst = 0.0;
    const long steps = std::lround(1.0 / dt);
    for (long k = 0; k < steps; ++k) {
      y = rk4_step(k * dt, y, dt, deriv);
      worst = std::max(worst, std::abs(energy(y) - e0));
    }
    return worst;
  };
  const double ratio = drift(2e-3) / drift(1e-3);
  CHECK(ratio > 8.0);
  CHECK(ratio < 32.0);
}

TEST_CASE("lyapunov diagnostic") {
  const RobotModel model;
  const DceaConfig cfg = DceaConfig::uniform(DceaOrder::FirstOrder, 0.5, 0.5, 0.1, 1,
                                             200.0 * Eigen::Matrix2d::Identity(),
                                             300.0 * Eigen::Matrix2d::Identity());

  // Zero error means zero value.
  const RunResult still = run_from_scenario(preset_scenario("equilibrium"));
  for (const double v : lyapunov_diagnostic(still.trace, 0, model, cfg)) {
    CHECK(std::abs(v) <= 1e-12);
  }

  // Positive on random states when the gain floor holds.
  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> unit(-10.0, 10.0);
  Trace synthetic;
  for (int k = 0; k < 1000; ++k) {
    TraceRecord rec;
    rec.time = k;
    rec.q = Eigen::MatrixXd::NullaryExpr(1, 2, [&](Eigen::Index, Eigen::Index) {
      return unit(rng);
    });
    rec.e = Eigen::MatrixXd::NullaryExpr(1, 2, [&](Eigen::Index, Eigen::Index) {
      return unit(rng);
    });
    rec.edot = Eigen::MatrixXd::NullaryExpr(1, 2, [&](Eigen::Index, Eigen::Index) {
      return unit(rng);
    });
    if (rec.e.cwiseAbs().maxCoeff() + rec.edot.cwiseAbs().maxCoeff() < 1e-6) continue;
    synthetic.records.push_back(std::move(rec));
  }
  for (const double v : lyapunov_diagnostic(synthetic, 0, model, cfg)) {
    CHECK(v > 0.0);
  }

  // Eventually bounded along a convergent run: the steady-window peak does
  // not exceed the transient peak.
  Scenario s = preset_scenario("example1-stable");
  s.record_stride = 50;
  const RunResult res = run_from_scenario(s);
  const auto vals = lyapunov_diagnostic(res.trace, 2, RobotModel{}, s.dcea);
  double head_max = 0.0, tail_max = 0.0;
  const size_t split = vals.size() * 4 / 5;
  for (size_t k = 0; k < vals.size(); ++k) {
    if (k < split) {
      head_max = std::max(head_max, vals[k]);
    } else {
      tail_max = std::max(tail_max, vals[k]);
    }
  }
  CHECK(tail_max <= head_max);
}

TEST_CASE("estimator trace obeys the sampled recursion through the full loop") {
  Scenario s = preset_scenario("example1-stable");
  s.t_end = 2.1;
  s.record_stride = 1000000;
  const RunResult res = run_from_scenario(s, 1.0);
  const Topology top = build_topology(s.W);
  const Eigen::MatrixXd Lambda = estimator_transition_matrix(top, s.dcea, 2);
  const TargetSpec target = make_target(s.target, 2);

  std::vector<const TraceRecord*> pre;
  for (const auto& rec : res.trace.records) {
    if (rec.kind == RecordKind::PreJump) pre.push_back(&rec);
  }
  REQUIRE(pre.size() >= 10);
  for (size_t k = 0; k + 1 < pre.size(); ++k) {
    const double tk = pre[k]->time;
    const double tk1 = pre[k + 1]->time;
    const Eigen::VectorXd x_k = stack_error_state(pre[k]->eps_bar, pre[k]->ups_bar);
    const Eigen::VectorXd x_k1 =
        stack_error_state(pre[k + 1]->eps_bar, pre[k + 1]->ups_bar);
    const Eigen::VectorXd d1 =
        target.position(tk) - target.position(tk1) + s.dcea.h * target.velocity(tk);
    const Eigen::VectorXd d2 = target.velocity(tk) - target.velocity(tk1);
    Eigen::VectorXd forcing(24);
    for (int i = 0; i < 6; ++i) {
      forcing.segment(2 * i, 2) = d1;
      forcing.segment(12 + 2 * i, 2) = d2;
    }
    CHECK((x_k1 - (Lambda * x_k + forcing)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("estimator errors stay within the certified radii on a stable run") {
  Scenario s = preset_scenario("example1-stable");
  const RunResult res = run_from_scenario(s);
  const Topology top = build_topology(s.W);
  const ModelBounds bounds =
      model_bounds(s.robots.front(), 0.0, example_disturbance().cap);
  const RegionEstimates reg =
      region_estimates(top, s.dcea, make_target(s.target, 2), bounds, 2);
  CHECK(res.metrics.sup_eps_bar_inf <= reg.delta1);
  CHECK(res.metrics.sup_ups_bar_inf <= reg.delta2);
}
