#include "nrs/models.hpp"

#include <cmath>
#include <limits>

namespace nrs {
namespace {

// Lumped coefficients of the two-link inertia matrix:
//   M = [[a + b + 2c cos q2, b + c cos q2], [b + c cos q2, b]].
struct InertiaCoeffs {
  double a, b, c;
};

InertiaCoeffs inertia_coeffs(const RobotModel& m) {
  const double lc1 = m.link_length[0] / 2.0;
  const double lc2 = m.link_length[1] / 2.0;
  InertiaCoeffs k;
  k.a = m.link_inertia[0] + m.link_mass[0] * lc1 * lc1 +
        m.link_mass[1] * m.link_length[0] * m.link_length[0];
  k.b = m.link_inertia[1] + m.link_mass[1] * lc2 * lc2;
  k.c = m.link_mass[1] * m.link_length[0] * lc2;
  return k;
}

Eigen::Vector2d mass_eigen_bounds(double a, double b, double c, double u) {
  // Eigenvalues of the 2x2 symmetric M at cos q2 = u.
  const double tr = a + 2.0 * b + 2.0 * c * u;
  const double det = a * b - c * c * u * u;
  const double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
  return {(tr - disc) / 2.0, (tr + disc) / 2.0};
}

}  // namespace

void RobotModel::validate() const {
  for (int i = 0; i < 2; ++i) {
    if (!(link_mass[i] > 0) || !(link_length[i] > 0) || !(link_inertia[i] > 0)) {
      throw std::invalid_argument("link masses, lengths and inertias must be positive");
    }
  }
  if (!std::isfinite(gravity_accel) || gravity_accel < 0) {
    throw std::invalid_argument("gravity_accel must be finite and nonnegative");
  }
}

Disturbance Disturbance::none(int m) {
  Disturbance d;
  d.torque = [m](double) { return Eigen::VectorXd::Zero(m).eval(); };
  d.cap = 0.0;
  return d;
}

Eigen::Matrix2d mass_matrix(const RobotModel& model, const Eigen::Vector2d& q) {
  const auto k = inertia_coeffs(model);
  const double cu = k.c * std::cos(q(1));
  Eigen::Matrix2d M;
  M << k.a + k.b + 2.0 * cu, k.b + cu, k.b + cu, k.b;
  return M;
}

Eigen::Matrix2d mass_matrix_rate(const RobotModel& model, const Eigen::Vector2d& q,
                                 const Eigen::Vector2d& qdot) {
  const auto k = inertia_coeffs(model);
  const double dc = -k.c * std::sin(q(1)) * qdot(1);
  Eigen::Matrix2d Md;
  Md << 2.0 * dc, dc, dc, 0.0;
  return Md;
}

Eigen::Matrix2d coriolis_matrix(const RobotModel& model, const Eigen::Vector2d& q,
                                const Eigen::Vector2d& qdot) {
  const auto k = inertia_coeffs(model);
  const double hc = -k.c * std::sin(q(1));
  Eigen::Matrix2d C;
  C << hc * qdot(1), hc * (qdot(0) + qdot(1)), -hc * qdot(0), 0.0;
  return C;
}

Eigen::Vector2d gravity_vector(const RobotModel& model, const Eigen::Vector2d& q) {
  const double g = model.gravity_accel;
  if (g == 0.0) return Eigen::Vector2d::Zero();
  const double lc1 = model.link_length[0] / 2.0;
  const double lc2 = model.link_length[1] / 2.0;
  const double a1 = model.link_mass[0] * lc1 + model.link_mass[1] * model.link_length[0];
  const double a2 = model.link_mass[1] * lc2;
  Eigen::Vector2d G;
  G << g * (a1 * std::cos(q(0)) + a2 * std::cos(q(0) + q(1))),
      g * a2 * std::cos(q(0) + q(1));
  return G;
}

Eigen::Vector2d forward_dynamics(const RobotModel& model, const Eigen::Vector2d& q,
                                 const Eigen::Vector2d& qdot, const Eigen::Vector2d& tau,
                                 const Eigen::Vector2d& tau_d) {
  const Eigen::Matrix2d M = mass_matrix(model, q);
  const Eigen::Vector2d rhs =
      tau + tau_d - coriolis_matrix(model, q, qdot) * qdot - gravity_vector(model, q);
  Eigen::FullPivLU<Eigen::Matrix2d> lu(M);
  const double pivot_ratio =
      std::abs(lu.matrixLU()(0, 0)) / std::max(std::abs(lu.matrixLU()(1, 1)), 1e-300);
  if (!lu.isInvertible() || pivot_ratio > 1e12) {
    throw SingularMassError("inertia matrix numerically singular");
  }
  return lu.solve(rhs);
}

ModelBounds model_bounds(const RobotModel& model, double /*velocity_cap*/,
                         double disturbance_cap) {
  if (disturbance_cap < 0) {
    throw std::invalid_argument("disturbance_cap must be nonnegative");
  }
  const auto k = inertia_coeffs(model);

  ModelBounds b;
  // Eigenvalue extremes of M over cos q2 in [-1, 1]: coarse grid plus
  // golden-section refinement around the grid winners.
  constexpr int kGrid = 4096;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  double u_lo = -1.0, u_hi = -1.0;
  for (int i = 0; i <= kGrid; ++i) {
    const double u = -1.0 + 2.0 * i / kGrid;
    const Eigen::Vector2d ev = mass_eigen_bounds(k.a, k.b, k.c, u);
    if (ev(0) < lo) {
      lo = ev(0);
      u_lo = u;
    }
    if (ev(1) > hi) {
      hi = ev(1);
      u_hi = u;
    }
  }
  const auto refine = [&](double center, bool minimize) {
    const double step = 2.0 / kGrid;
    double a = std::max(-1.0, center - step);
    double c = std::min(1.0, center + step);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    const auto f = [&](double u) {
      const Eigen::Vector2d ev = mass_eigen_bounds(k.a, k.b, k.c, u);
      return minimize ? ev(0) : -ev(1);
    };
    double x1 = c - gr * (c - a);
    double x2 = a + gr * (c - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        c = x2;
        x2 = x1;
        f2 = f1;
        x1 = c - gr * (c - a);
        f1 = f(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (c - a);
        f2 = f(x2);
      }
    }
    const double fm = std::min(f1, f2);
    return minimize ? fm : -fm;
  };
  b.lambda_m = std::min(lo, refine(u_lo, true));
  b.lambda_M = std::max(hi, refine(u_hi, false));

  // ||C(eta, q)||_2 <= |c sin q2| ||[[e2, e1+e2], [-e1, 0]]||_2
  //                 <= c sqrt(3) ||eta||_2 (Frobenius bound).
  b.lambda_c = k.c * std::sqrt(3.0);

  const double g = model.gravity_accel;
  if (g == 0.0) {
    b.lambda_g = std::numeric_limits<double>::min();
    b.gravity_degenerate = true;
  } else {
    const double a1 =
        model.link_mass[0] * model.link_length[0] / 2.0 +
        model.link_mass[1] * model.link_length[0];
    const double a2 = model.link_mass[1] * model.link_length[1] / 2.0;
    // Worst case aligns both joint angles: ||G||^2 = (a1+a2)^2 + a2^2.
    b.lambda_g = g * std::sqrt((a1 + a2) * (a1 + a2) + a2 * a2);
  }

  if (disturbance_cap == 0.0) {
    b.lambda_d = std::numeric_limits<double>::min();
    b.disturbance_degenerate = true;
  } else {
    b.lambda_d = disturbance_cap;
  }
  return b;
}

TargetSpec example_target() {
  TargetSpec t;
  t.dof = 2;
  t.position = [](double s) {
    return Eigen::Vector2d(2.0 * s + std::sin(s), -2.0 * s - std::cos(s)).eval();
  };
  t.velocity = [](double s) {
    return Eigen::Vector2d(2.0 + std::cos(s), -2.0 + std::sin(s)).eval();
  };
  t.accel = [](double s) { return Eigen::Vector2d(-std::sin(s), std::cos(s)).eval(); };
  t.gamma1 = 3.0;
  t.gamma2 = 1.0;
  return t;
}

Disturbance example_disturbance() {
  Disturbance d;
  d.torque = [](double s) {
    return Eigen::Vector2d(2.0 * std::sin(s), 2.0 * std::cos(2.0 * s)).eval();
  };
  d.cap = 2.0 * std::sqrt(2.0);
  return d;
}

TargetSpec static_target(const Eigen::VectorXd& position) {
  TargetSpec t;
  t.dof = static_cast<int>(position.size());
  const Eigen::VectorXd p = position;
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(position.size());
  t.position = [p](double) { return p; };
  t.velocity = [z](double) { return z; };
  t.accel = [z](double) { return z; };
  t.gamma1 = 0.0;
  t.gamma2 = 0.0;
  return t;
}

}  // namespace nrs
