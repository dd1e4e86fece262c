#include "nrs/dcea.hpp"

#include <cmath>

namespace nrs {
namespace {

void check_dims(const Topology& t, const EstimatorState& s, const Eigen::VectorXd& te,
                const Eigen::VectorXd& tu) {
  if (s.eps.rows() != t.n || s.ups.rows() != t.n || s.eps.cols() != s.ups.cols()) {
    throw DimensionMismatch("estimator state does not match topology size");
  }
  if (te.size() != s.eps.cols() || tu.size() != s.eps.cols()) {
    throw DimensionMismatch("target sample does not match estimator dof");
  }
}

// Weighted disagreement sum_j (w_ij / varpi_i)(v_j - v_i) for every robot,
// with node 0 contributing the target row. Reads only the pre-jump values.
Eigen::MatrixXd disagreement(const Topology& t, const Eigen::MatrixXd& value,
                             const Eigen::VectorXd& target_value) {
  Eigen::MatrixXd out(value.rows(), value.cols());
  for (int i = 0; i < t.n; ++i) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(value.cols());
    if (t.zeta(i) > 0.0) {
      acc += t.zeta(i) * (target_value.transpose() - value.row(i));
    }
    for (int j = 0; j < t.n; ++j) {
      if (t.What(i, j) > 0.0) {
        acc += t.What(i, j) * (value.row(j) - value.row(i));
      }
    }
    out.row(i) = acc / t.varpi(i);
  }
  return out;
}

}  // namespace

DceaConfig DceaConfig::uniform(DceaOrder order, double alpha, double beta, double h,
                               int n, const Eigen::MatrixXd& Kp,
                               const Eigen::MatrixXd& Kd) {
  DceaConfig cfg;
  cfg.order = order;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.h = h;
  cfg.Kp.assign(n, Kp);
  cfg.Kd.assign(n, Kd);
  return cfg;
}

void DceaConfig::validate() const {
  if (!(alpha > 0) || !(beta > 0) || !(h > 0)) {
    throw std::invalid_argument("alpha, beta and h must be positive");
  }
  if (Kp.empty() || Kp.size() != Kd.size()) {
    throw std::invalid_argument("need one Kp and one Kd per robot");
  }
  for (size_t i = 0; i < Kp.size(); ++i) {
    for (const auto* K : {&Kp[i], &Kd[i]}) {
      if (K->rows() != K->cols() || K->rows() != dof()) {
        throw std::invalid_argument("gain matrices must be square with equal dof");
      }
      if (!K->isApprox(K->transpose(), 1e-12)) {
        throw std::invalid_argument("gain matrices must be symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*K);
      if (es.eigenvalues().minCoeff() <= 0) {
        throw std::invalid_argument("gain matrices must be positive definite");
      }
    }
  }
}

Eigen::VectorXd control_torque(const DceaConfig& cfg, int i, const Eigen::VectorXd& eps_i,
                               const Eigen::VectorXd& ups_i, const Eigen::VectorXd& q_i,
                               const Eigen::VectorXd& qdot_i) {
  return cfg.Kp.at(i) * (eps_i - q_i) + cfg.Kd.at(i) * (ups_i - qdot_i);
}

EstimatorState estimator_flow(const EstimatorState& state, double dt) {
  EstimatorState out;
  out.eps = state.eps + dt * state.ups;
  out.ups = state.ups;
  return out;
}

EstimatorState first_order_jump(const Topology& t, const DceaConfig& cfg,
                                const EstimatorState& state,
                                const Eigen::VectorXd& target_eps,
                                const Eigen::VectorXd& target_ups) {
  check_dims(t, state, target_eps, target_ups);
  EstimatorState out;
  out.eps = state.eps + cfg.alpha * disagreement(t, state.eps, target_eps);
  out.ups = state.ups + cfg.beta * disagreement(t, state.ups, target_ups);
  return out;
}

EstimatorState second_order_jump(const Topology& t, const DceaConfig& cfg,
                                 const EstimatorState& state,
                                 const Eigen::VectorXd& target_eps,
                                 const Eigen::VectorXd& target_ups) {
  check_dims(t, state, target_eps, target_ups);
  EstimatorState out;
  out.eps = state.eps;
  out.ups = state.ups + cfg.alpha * disagreement(t, state.eps, target_eps) +
            cfg.beta * disagreement(t, state.ups, target_ups);
  return out;
}

EstimatorState estimator_jump(const Topology& t, const DceaConfig& cfg,
                              const EstimatorState& state,
                              const Eigen::VectorXd& target_eps,
                              const Eigen::VectorXd& target_ups) {
  return cfg.order == DceaOrder::FirstOrder
             ? first_order_jump(t, cfg, state, target_eps, target_ups)
             : second_order_jump(t, cfg, state, target_eps, target_ups);
}

Eigen::MatrixXd estimator_transition_factor(const Topology& t, const DceaConfig& cfg) {
  const int n = t.n;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Bm = (1.0 - cfg.beta) * I + cfg.beta * t.D;
  Eigen::MatrixXd T(2 * n, 2 * n);
  if (cfg.order == DceaOrder::FirstOrder) {
    T.topLeftCorner(n, n) = (1.0 - cfg.alpha) * I + cfg.alpha * t.D;
    T.bottomLeftCorner(n, n).setZero();
  } else {
    T.topLeftCorner(n, n) = (1.0 - cfg.alpha * cfg.h) * I + cfg.alpha * cfg.h * t.D;
    T.bottomLeftCorner(n, n) = cfg.alpha * (t.D - I);
  }
  T.topRightCorner(n, n) = cfg.h * Bm;
  T.bottomRightCorner(n, n) = Bm;
  return T;
}

Eigen::MatrixXd estimator_transition_matrix(const Topology& t, const DceaConfig& cfg,
                                            int m) {
  return kron_identity(estimator_transition_factor(t, cfg), m);
}

Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& A, int m) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(A.rows() * m, A.cols() * m);
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      if (A(r, c) != 0.0) {
        K.block(r * m, c * m, m, m) =
            A(r, c) * Eigen::MatrixXd::Identity(m, m);
      }
    }
  }
  return K;
}

}  // namespace nrs
