#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "nrs/topology.hpp"

namespace nrs {

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DceaOrder { FirstOrder, SecondOrder };

/// Controller-estimator parameters. alpha/beta weight the position and
/// velocity disagreement terms of the estimator jump, h is the sampling
/// period, Kp/Kd are the per-robot PD gains (symmetric positive definite).
struct DceaConfig {
  DceaOrder order = DceaOrder::FirstOrder;
  double alpha = 0;
  double beta = 0;
  double h = 0;
  std::vector<Eigen::MatrixXd> Kp;
  std::vector<Eigen::MatrixXd> Kd;

  int dof() const { return Kp.empty() ? 0 : static_cast<int>(Kp.front().rows()); }
  int robots() const { return static_cast<int>(Kp.size()); }

  static DceaConfig uniform(DceaOrder order, double alpha, double beta, double h,
                            int n, const Eigen::MatrixXd& Kp, const Eigen::MatrixXd& Kd);

  /// Throws std::invalid_argument on nonpositive alpha/beta/h or
  /// non-symmetric / non-positive-definite gains.
  void validate() const;
};

/// Per-robot target estimates; row i holds robot i's (eps_i, ups_i).
struct EstimatorState {
  Eigen::MatrixXd eps;
  Eigen::MatrixXd ups;
};

/// tau_i = Kp_i (eps_i - q_i) + Kd_i (ups_i - qdot_i).
Eigen::VectorXd control_torque(const DceaConfig& cfg, int i, const Eigen::VectorXd& eps_i,
                               const Eigen::VectorXd& ups_i, const Eigen::VectorXd& q_i,
                               const Eigen::VectorXd& qdot_i);

/// Exact flow of eps' = ups, ups' = 0 over dt.
EstimatorState estimator_flow(const EstimatorState& state, double dt);

/// Impulsive update at a sampling time, both estimates jump:
///   eps_i += alpha * sum_j (w_ij / varpi_i)(eps_j - eps_i)
///   ups_i += beta  * sum_j (w_ij / varpi_i)(ups_j - ups_i)
/// where j = 0 contributes the exact sampled target values. All rows are
/// computed from the same pre-jump snapshot.
EstimatorState first_order_jump(const Topology& t, const DceaConfig& cfg,
                                const EstimatorState& state,
                                const Eigen::VectorXd& target_eps,
                                const Eigen::VectorXd& target_ups);

/// Impulsive update where only ups jumps, driven by both disagreements:
///   ups_i += alpha * (position term) + beta * (velocity term).
EstimatorState second_order_jump(const Topology& t, const DceaConfig& cfg,
                                 const EstimatorState& state,
                                 const Eigen::VectorXd& target_eps,
                                 const Eigen::VectorXd& target_ups);

/// Jump dispatched on cfg.order.
EstimatorState estimator_jump(const Topology& t, const DceaConfig& cfg,
                              const EstimatorState& state,
                              const Eigen::VectorXd& target_eps,
                              const Eigen::VectorXd& target_ups);

/// 2n x 2n sampled transition block of the estimator error recursion
/// x(t_{k+1}) = T x(t_k) + forcing, before the Kronecker lift. With
/// A = (1-alpha) I + alpha D and Bm = (1-beta) I + beta D:
///   first order:  [[A, h Bm], [0, Bm]]
///   second order: [[(1-alpha h) I + alpha h D, h Bm], [alpha (D - I), Bm]]
Eigen::MatrixXd estimator_transition_factor(const Topology& t, const DceaConfig& cfg);

/// Full 2nm x 2nm transition matrix: factor entries expanded by I_m.
Eigen::MatrixXd estimator_transition_matrix(const Topology& t, const DceaConfig& cfg,
                                            int m);

/// kron(A, I_m).
Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& A, int m);

}  // namespace nrs
