#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <stdexcept>

namespace nrs {

struct SingularMassError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Planar manipulator with two revolute joints and uniform thin links
/// (center of mass at l/2). Angles are measured from the horizontal
/// x-axis, gravity acts along -y, so the gravity torque vanishes at
/// q1 = pi/2, q2 = 0. Defaults: 1 kg / 1 m links, I = m l^2 / 12.
struct RobotModel {
  static constexpr int dof = 2;
  std::array<double, 2> link_mass{1.0, 1.0};
  std::array<double, 2> link_length{1.0, 1.0};
  std::array<double, 2> link_inertia{1.0 / 12.0, 1.0 / 12.0};
  double gravity_accel = 9.81;

  void validate() const;
};

/// Norm bounds for the dynamics terms: lambda_m <= ||M(q)||_2 <= lambda_M,
/// ||C(eta,q)||_2 <= lambda_c ||eta||_2, ||G(q)||_2 <= lambda_g,
/// ||tau_d||_2 <= lambda_d. The degenerate flags mark bounds that would be
/// zero and are stored as the smallest positive double instead.
struct ModelBounds {
  double lambda_m = 0;
  double lambda_M = 0;
  double lambda_c = 0;
  double lambda_g = 0;
  double lambda_d = 0;
  bool gravity_degenerate = false;
  bool disturbance_degenerate = false;
};

/// Reference trajectory with velocity/acceleration sup-norm bounds
/// gamma1, gamma2 (infinity norms over time).
struct TargetSpec {
  int dof = 2;
  std::function<Eigen::VectorXd(double)> position;
  std::function<Eigen::VectorXd(double)> velocity;
  std::function<Eigen::VectorXd(double)> accel;
  double gamma1 = 0;
  double gamma2 = 0;
};

struct Disturbance {
  std::function<Eigen::VectorXd(double)> torque;
  double cap = 0;  // sup_t ||tau_d(t)||_2

  static Disturbance none(int m);
};

/// Inertia matrix; symmetric positive definite for any q.
/// M11 = I1 + I2 + m1 lc1^2 + m2 (l1^2 + lc2^2 + 2 l1 lc2 cos q2),
/// M12 = M21 = I2 + m2 (lc2^2 + l1 lc2 cos q2), M22 = I2 + m2 lc2^2.
Eigen::Matrix2d mass_matrix(const RobotModel& model, const Eigen::Vector2d& q);

/// Analytic dM/dt along (q, qdot).
Eigen::Matrix2d mass_matrix_rate(const RobotModel& model, const Eigen::Vector2d& q,
                                 const Eigen::Vector2d& qdot);

/// Christoffel-symbol Coriolis matrix; Mdot - 2C is skew-symmetric and
/// C is linear in the velocity argument.
Eigen::Matrix2d coriolis_matrix(const RobotModel& model, const Eigen::Vector2d& q,
                                const Eigen::Vector2d& qdot);

Eigen::Vector2d gravity_vector(const RobotModel& model, const Eigen::Vector2d& q);

/// qddot = M(q)^{-1} (tau + tau_d - C(q,qdot) qdot - G(q)), via a direct
/// solve. Throws SingularMassError if the 2x2 system is ill-conditioned
/// (cannot happen for a valid model; guarded anyway).
Eigen::Vector2d forward_dynamics(const RobotModel& model, const Eigen::Vector2d& q,
                                 const Eigen::Vector2d& qdot, const Eigen::Vector2d& tau,
                                 const Eigen::Vector2d& tau_d);

/// lambda_m / lambda_M from the eigenvalue extremes of M over q2,
/// lambda_c from the Christoffel magnitudes, lambda_g from the worst-case
/// gravity configuration, lambda_d = disturbance_cap. velocity_cap is
/// accepted for interface stability but unused: the C bound is linear in
/// ||eta||_2, so no velocity cap enters it.
ModelBounds model_bounds(const RobotModel& model, double velocity_cap,
                         double disturbance_cap);

/// eps0(t) = (2t + sin t, -2t - cos t) with gamma1 = 3, gamma2 = 1.
TargetSpec example_target();

/// tau_d(t) = 2 (sin t, cos 2t); cap 2 sqrt(2).
Disturbance example_disturbance();

TargetSpec static_target(const Eigen::VectorXd& position);

}  // namespace nrs
