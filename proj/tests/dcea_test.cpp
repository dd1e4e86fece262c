#include <doctest.h>

#include <random>

#include "nrs/dcea.hpp"
#include "nrs/models.hpp"
#include "nrs/scenario.hpp"
#include "nrs/simulate.hpp"

using namespace nrs;

namespace {

std::mt19937_64 rng(999);
std::uniform_real_distribution<double> unit(-10.0, 10.0);

EstimatorState random_state(int n, int m) {
  EstimatorState s;
  s.eps.resize(n, m);
  s.ups.resize(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      s.eps(i, j) = unit(rng);
      s.ups(i, j) = unit(rng);
    }
  }
  return s;
}

DceaConfig paper_cfg(DceaOrder order, double alpha, double beta, double h) {
  return DceaConfig::uniform(order, alpha, beta, h, 6,
                             200.0 * Eigen::Matrix2d::Identity(),
                             300.0 * Eigen::Matrix2d::Identity());
}

}  // namespace

TEST_CASE("control torque") {
  const DceaConfig cfg = paper_cfg(DceaOrder::FirstOrder, 0.9, 1.1, 0.1);
  const Eigen::Vector2d q(0.3, -0.2), qd(1.0, 2.0);
  CHECK(control_torque(cfg, 0, q, qd, q, qd).norm() == 0.0);

  const Eigen::Vector2d eps = q + Eigen::Vector2d(1.0, 0.0);
  const Eigen::Vector2d ups = qd + Eigen::Vector2d(0.0, -1.0);
  const Eigen::VectorXd tau = control_torque(cfg, 2, eps, ups, q, qd);
  CHECK(tau(0) == doctest::Approx(200.0));
  CHECK(tau(1) == doctest::Approx(-300.0));

  // Scaling both gains scales the torque.
  DceaConfig scaled = cfg;
  for (auto& K : scaled.Kp) K *= 2.5;
  for (auto& K : scaled.Kd) K *= 2.5;
  const Eigen::VectorXd tau2 = control_torque(scaled, 2, eps, ups, q, qd);
  CHECK((tau2 - 2.5 * tau).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("estimator flow is the exact linear drift") {
  const EstimatorState s = random_state(4, 2);
  const EstimatorState same = estimator_flow(s, 0.0);
  CHECK((same.eps.array() == s.eps.array()).all());
  CHECK((same.ups.array() == s.ups.array()).all());

  EstimatorState one;
  one.eps = Eigen::MatrixXd::Zero(1, 2);
  one.ups = (Eigen::MatrixXd(1, 2) << 1.0, 2.0).finished();
  const EstimatorState moved = estimator_flow(one, 0.1);
  CHECK(moved.eps(0, 0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(moved.eps(0, 1) == doctest::Approx(0.2).epsilon(1e-14));

  const EstimatorState whole = estimator_flow(s, 0.4);
  const EstimatorState halves = estimator_flow(estimator_flow(s, 0.2), 0.2);
  CHECK((whole.eps - halves.eps).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((whole.ups - halves.ups).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("consensus is a fixed point of both jumps") {
  const Topology top = build_topology(paper_topology_matrix());
  const Eigen::Vector2d e0(3.0, -4.0), u0(0.5, 0.25);
  EstimatorState s;
  s.eps = e0.transpose().replicate(6, 1);
  s.ups = u0.transpose().replicate(6, 1);
  for (const DceaOrder order : {DceaOrder::FirstOrder, DceaOrder::SecondOrder}) {
    const DceaConfig cfg = paper_cfg(order, 0.9, 1.1, 0.1);
    const EstimatorState out = estimator_jump(top, cfg, s, e0, u0);
    CHECK((out.eps - s.eps).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((out.ups - s.ups).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("single robot with alpha = 1 corrects fully onto the sample") {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, 2);
  W(1, 0) = 1.0;
  const Topology top = build_topology(W);
  const DceaConfig cfg = DceaConfig::uniform(DceaOrder::FirstOrder, 1.0, 0.5, 0.1, 1,
                                             Eigen::Matrix2d::Identity(),
                                             Eigen::Matrix2d::Identity());
  const EstimatorState s = random_state(1, 2);
  const Eigen::Vector2d e0(7.0, -3.0), u0(1.0, 1.0);
  const EstimatorState out = first_order_jump(top, cfg, s, e0, u0);
  CHECK((out.eps.row(0).transpose() - e0).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("second-order single-robot update") {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, 2);
  W(1, 0) = 1.0;
  const Topology top = build_topology(W);
  const double alpha = 0.7, beta = 0.4;
  const DceaConfig cfg = DceaConfig::uniform(DceaOrder::SecondOrder, alpha, beta, 0.1,
                                             1, Eigen::Matrix2d::Identity(),
                                             Eigen::Matrix2d::Identity());
  const EstimatorState s = random_state(1, 2);
  const Eigen::Vector2d e0(7.0, -3.0), u0(1.0, -1.0);
  const EstimatorState out = second_order_jump(top, cfg, s, e0, u0);
  CHECK((out.eps.array() == s.eps.array()).all());  // eps never jumps
  const Eigen::Vector2d expect = s.ups.row(0).transpose() +
                                 alpha * (e0 - s.eps.row(0).transpose()) +
                                 beta * (u0 - s.ups.row(0).transpose());
  CHECK((out.ups.row(0).transpose() - expect).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("robot-5 row expands as the printed weights say") {
  const Topology top = build_topology(paper_topology_matrix());
  const DceaConfig cfg = paper_cfg(DceaOrder::FirstOrder, 0.9, 1.1, 0.1);
  const EstimatorState s = random_state(6, 2);
  const Eigen::Vector2d e0(1.0, 2.0), u0(0.0, 0.0);
  const EstimatorState out = first_order_jump(top, cfg, s, e0, u0);
  // Robot 5 (row index 4) reads robots 2, 3, 4 with varpi = 3.
  const Eigen::RowVector2d expect =
      s.eps.row(4) + (cfg.alpha / 3.0) * ((s.eps.row(1) - s.eps.row(4)) +
                                          (s.eps.row(2) - s.eps.row(4)) +
                                          (s.eps.row(3) - s.eps.row(4)));
  CHECK((out.eps.row(4) - expect).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("jump maps are affine with snapshot semantics") {
  const Topology top = build_topology(paper_topology_matrix());
  for (const DceaOrder order : {DceaOrder::FirstOrder, DceaOrder::SecondOrder}) {
    const DceaConfig cfg = paper_cfg(order, 0.8, 1.05, 0.1);
    for (int trial = 0; trial < 20; ++trial) {
      const EstimatorState s1 = random_state(6, 2);
      const EstimatorState s2 = random_state(6, 2);
      const Eigen::Vector2d e0(unit(rng), unit(rng)), u0(unit(rng), unit(rng));
      const EstimatorState j1 = estimator_jump(top, cfg, s1, e0, u0);
      const EstimatorState j2 = estimator_jump(top, cfg, s2, e0, u0);
      EstimatorState diff;
      diff.eps = s1.eps - s2.eps;
      diff.ups = s1.ups - s2.ups;
      const EstimatorState jd = estimator_jump(top, cfg, diff, Eigen::Vector2d::Zero(),
                                               Eigen::Vector2d::Zero());
      CHECK(((j1.eps - j2.eps) - jd.eps).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(((j1.ups - j2.ups) - jd.ups).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("jump result is invariant under robot relabeling") {
  const Eigen::MatrixXd W = paper_topology_matrix();
  const Topology top = build_topology(W);
  const DceaConfig cfg = paper_cfg(DceaOrder::FirstOrder, 0.9, 1.1, 0.1);
  const EstimatorState s = random_state(6, 2);
  const Eigen::Vector2d e0(1.0, -2.0), u0(0.3, 0.7);
  const EstimatorState base = estimator_jump(top, cfg, s, e0, u0);

  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  Eigen::MatrixXd Wp = Eigen::MatrixXd::Zero(7, 7);
  for (int i = 0; i < 6; ++i) {
    Wp(perm[i] + 1, 0) = W(i + 1, 0);
    for (int j = 0; j < 6; ++j) Wp(perm[i] + 1, perm[j] + 1) = W(i + 1, j + 1);
  }
  EstimatorState sp;
  sp.eps.resize(6, 2);
  sp.ups.resize(6, 2);
  for (int i = 0; i < 6; ++i) {
    sp.eps.row(perm[i]) = s.eps.row(i);
    sp.ups.row(perm[i]) = s.ups.row(i);
  }
  const EstimatorState out =
      estimator_jump(build_topology(Wp), cfg, sp, e0, u0);
  for (int i = 0; i < 6; ++i) {
    CHECK((out.eps.row(perm[i]) - base.eps.row(i)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((out.ups.row(perm[i]) - base.ups.row(i)).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("transition matrix degenerate forms") {
  const Topology top = build_topology(paper_topology_matrix());
  DceaConfig cfg = paper_cfg(DceaOrder::FirstOrder, 0.0, 0.0, 0.25);
  const Eigen::MatrixXd L = estimator_transition_matrix(top, cfg, 2);
  Eigen::MatrixXd drift = Eigen::MatrixXd::Identity(24, 24);
  drift.topRightCorner(12, 12) = 0.25 * Eigen::MatrixXd::Identity(12, 12);
  CHECK((L - drift).cwiseAbs().maxCoeff() == 0.0);

  DceaConfig second = paper_cfg(DceaOrder::SecondOrder, 0.6, 0.3, 0.0);
  const Eigen::MatrixXd G = estimator_transition_factor(top, second);
  const Eigen::MatrixXd I6 = Eigen::MatrixXd::Identity(6, 6);
  CHECK((G.topLeftCorner(6, 6) - I6).cwiseAbs().maxCoeff() == 0.0);
  CHECK(G.topRightCorner(6, 6).cwiseAbs().maxCoeff() == 0.0);
  CHECK((G.bottomLeftCorner(6, 6) - 0.6 * (top.D - I6)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((G.bottomRightCorner(6, 6) - (0.7 * I6 + 0.3 * top.D)).cwiseAbs().maxCoeff() <
        1e-15);
}

TEST_CASE("one jump-then-flow period equals the transition matrix in error coordinates") {
  const Topology top = build_topology(paper_topology_matrix());
  // Static target: the forcing term vanishes.
  const Eigen::Vector2d e0(2.0, -1.0);
  const Eigen::Vector2d u0(0.0, 0.0);
  for (const DceaOrder order : {DceaOrder::FirstOrder, DceaOrder::SecondOrder}) {
    const DceaConfig cfg = paper_cfg(order, 0.9, 1.1, 0.1);
    const Eigen::MatrixXd T = estimator_transition_matrix(top, cfg, 2);
    for (int trial = 0; trial < 20; ++trial) {
      const EstimatorState s = random_state(6, 2);
      const EstimatorState mapped =
          estimator_flow(estimator_jump(top, cfg, s, e0, u0), cfg.h);
      const Eigen::VectorXd x =
          stack_error_state(s.eps.rowwise() - e0.transpose(), s.ups);
      const Eigen::VectorXd x_next = stack_error_state(
          mapped.eps.rowwise() - e0.transpose(), mapped.ups);
      CHECK((x_next - T * x).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("sampled recursion matches a direct estimator-only simulation") {
  const Topology top = build_topology(paper_topology_matrix());
  const TargetSpec target = example_target();
  for (const DceaOrder order : {DceaOrder::FirstOrder, DceaOrder::SecondOrder}) {
    const DceaConfig cfg = paper_cfg(order, 0.9, 1.1, 0.1);
    const Eigen::MatrixXd T = estimator_transition_matrix(top, cfg, 2);
    for (int trial = 0; trial < 100; ++trial) {
      EstimatorState s = random_state(6, 2);
      double tk = 1.0 + trial * 0.1;  // pre-jump state at some sampling time
      const Eigen::VectorXd p_k = target.position(tk);
      const Eigen::VectorXd v_k = target.velocity(tk);
      const Eigen::VectorXd x_k = stack_error_state(
          s.eps.rowwise() - p_k.transpose(), s.ups.rowwise() - v_k.transpose());

      const EstimatorState next =
          estimator_flow(estimator_jump(top, cfg, s, p_k, v_k), cfg.h);
      const double tk1 = tk + cfg.h;
      const Eigen::VectorXd p_k1 = target.position(tk1);
      const Eigen::VectorXd v_k1 = target.velocity(tk1);
      const Eigen::VectorXd x_k1 =
          stack_error_state(next.eps.rowwise() - p_k1.transpose(),
                            next.ups.rowwise() - v_k1.transpose());

      const Eigen::VectorXd d1 = p_k - p_k1 + cfg.h * v_k;
      const Eigen::VectorXd d2 = v_k - v_k1;
      Eigen::VectorXd forcing(24);
      for (int i = 0; i < 6; ++i) {
        forcing.segment(2 * i, 2) = d1;
        forcing.segment(12 + 2 * i, 2) = d2;
      }
      CHECK((x_k1 - (T * x_k + forcing)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const Topology top = build_topology(paper_topology_matrix());
  const DceaConfig cfg = paper_cfg(DceaOrder::FirstOrder, 0.9, 1.1, 0.1);
  EstimatorState bad = random_state(5, 2);
  CHECK_THROWS_AS(
      first_order_jump(top, cfg, bad, Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()),
      DimensionMismatch);
  EstimatorState s = random_state(6, 2);
  CHECK_THROWS_AS(
      second_order_jump(top, cfg, s, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()),
      DimensionMismatch);
}

TEST_CASE("config validation") {
  DceaConfig cfg = paper_cfg(DceaOrder::FirstOrder, 0.9, 1.1, 0.1);
  CHECK_NOTHROW(cfg.validate());
  DceaConfig bad = cfg;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.Kp[2] = -Eigen::Matrix2d::Identity();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.Kd[0](0, 1) = 3.0;  // asymmetric
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
