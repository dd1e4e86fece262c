#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nrs/dcea.hpp"
#include "nrs/models.hpp"
#include "nrs/topology.hpp"

namespace nrs {

struct SpectrumOnUnitCircle : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BetaTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotSchur : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScalingOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleDesign : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything the admissibility analysis produces for one configuration:
/// the D-spectrum, the common alpha/beta cap, theta_i = Re(2/(1-s_i)) and
/// vartheta_i = Im(2/(1-s_i)), the velocity-gain cap min_i theta_i, the
/// sampling-period cap for the second-order law (when computable), and
/// direct Schur verdicts for both closed-loop transition matrices.
struct StabilityReport {
  Eigen::VectorXcd spectrum;
  double alpha_beta_bound = 0;
  std::vector<double> theta;
  std::vector<double> vartheta;
  double beta_cap = 0;
  std::optional<double> h_bound;
  bool schur_Lambda = false;
  bool schur_Gamma = false;
};

/// min_i (2 - 2 Re s_i) / |1 - s_i|^2. Positive whenever all |s_i| < 1.
/// Throws SpectrumOnUnitCircle if some s_i is (numerically) 1, which
/// means the graph has no spanning tree.
double alpha_beta_bound(const Eigen::VectorXcd& spectrum);

/// min_i 2 beta^2 (theta_i - beta) / (alpha (vartheta_i^2 + beta^2)).
/// Requires beta < min_i theta_i (BetaTooLarge otherwise).
double h_bound_second_order(const Eigen::VectorXcd& spectrum, double alpha, double beta);

/// Spectral radius strictly below 1 (tolerance 1e-10).
bool is_schur(const Eigen::MatrixXd& A);

/// Schur verdict for the closed-loop transition matrix computed without
/// assembling it, through the bilinear transform of its characteristic
/// factors. First order: both factor roots must map into the left half
/// plane, i.e. alpha and beta below the admissible cap. Second order: the
/// Hurwitz conditions 2 beta/(alpha h) > 0 and
/// beta^2 [2(theta_i - beta)/(alpha h) - 1] - vartheta_i^2 > 0 for all i.
bool schur_via_bilinear(const Eigen::VectorXcd& spectrum, double alpha, double beta,
                        double h, DceaOrder order);

/// Cross-check of the determinant identity
///   det(lambda I - T) = prod_i [factor_i(lambda)]^m
/// at random probe points; returns the maximum relative residual.
double characteristic_factorization_check(const Topology& t, const DceaConfig& cfg,
                                          int m, int num_probes,
                                          std::uint64_t seed = 0x5eed);

/// Invertible transform T with ||T A T^{-1}||_inf < 1 plus the vector-norm
/// equivalence constants: ||eta||_inf <= b ||T eta||_inf and
/// ||T eta||_inf <= c ||eta||_inf.
struct NormCertificate {
  Eigen::MatrixXcd transform;
  Eigen::MatrixXcd inverse_transform;
  double induced_norm_value = 0;
  double b = 0;
  double c = 0;
};

/// Builds a norm certificate for a Schur matrix: complex triangularization,
/// reordering into eigenvalue clusters, exact decoupling of the clusters by
/// triangular Sylvester solves, then a geometric diagonal scaling inside
/// each cluster sized so the strict upper part contributes less than
/// slack * (1 - rho). The certificate is rejected (ScalingOverflow) unless
/// the induced norm evaluates below 1 in plain floating point on the
/// stored transform.
NormCertificate small_value_norm(const Eigen::MatrixXcd& A, double slack = 0.5);
NormCertificate small_value_norm(const Eigen::MatrixXd& A, double slack = 0.5);

/// ||T eta||_inf for a real vector under the certificate transform.
double certified_vector_norm(const NormCertificate& cert, const Eigen::VectorXd& eta);

/// Geometric-series error radii. For the first-order law kappa1/kappa2
/// and delta1..delta4 are filled; for the second-order law kappa3 and
/// delta5/delta6, with delta1 = delta2 = h kappa3. delta3..delta6 are
/// +inf when the gain hypotheses fail (flagged).
struct RegionEstimates {
  double kappa1 = 0;
  double kappa2 = 0;
  double kappa3 = 0;
  double delta1 = 0;
  double delta2 = 0;
  double delta3 = 0;
  double delta4 = 0;
  double delta5 = 0;
  double delta6 = 0;
  Eigen::VectorXd mu1;
  Eigen::VectorXd varrho1;
  Eigen::VectorXd varrho2;
  bool gain_hypotheses_ok = false;
};

RegionEstimates region_estimates(const Topology& t, const DceaConfig& cfg,
                                 const TargetSpec& target, const ModelBounds& bounds,
                                 int m);

/// Gain floors and sampling-period cap that place the tracking errors in
/// balls of radius delta_pos / delta_vel, for a split parameter
/// epsilon in (0,1).
struct GainDesign {
  double kp_floor = 0;
  double kd_floor = 0;
  double h_cap = 0;
};

GainDesign design_parameters(double delta_pos, double delta_vel, double epsilon,
                             const Topology& t, const DceaConfig& cfg,
                             const TargetSpec& target, const ModelBounds& bounds, int m);

StabilityReport make_stability_report(const Topology& t, const DceaConfig& cfg);

}  // namespace nrs
