#include "nrs/stability.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <random>

namespace nrs {
namespace {

using Complex = std::complex<double>;

constexpr double kSchurTol = 1e-10;

double max_row_sum(const Eigen::MatrixXcd& M) {
  return M.cwiseAbs().rowwise().sum().maxCoeff();
}

// Swaps the diagonal entries k and k+1 of the upper-triangular T by a
// unitary similarity, accumulating the rotation into U.
void swap_adjacent(Eigen::MatrixXcd& T, Eigen::MatrixXcd& U, Eigen::Index k) {
  const Complex a = T(k, k);
  const Complex b = T(k + 1, k + 1);
  const Complex c = T(k, k + 1);
  Eigen::Vector2cd v(c, b - a);
  const double nv = v.norm();
  if (nv < 1e-300) return;  // equal eigenvalues; nothing to move
  v /= nv;
  Eigen::Matrix2cd G;
  G << v(0), -std::conj(v(1)), v(1), std::conj(v(0));
  T.middleRows(k, 2) = G.adjoint() * T.middleRows(k, 2);
  T.middleCols(k, 2) = T.middleCols(k, 2) * G;
  U.middleCols(k, 2) = U.middleCols(k, 2) * G;
  T(k + 1, k) = Complex(0, 0);
}

// Union-find clustering of the diagonal by pairwise distance <= tol.
std::vector<int> cluster_labels(const Eigen::VectorXcd& diag, double tol) {
  const int p = static_cast<int>(diag.size());
  std::vector<int> parent(p);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      if (std::abs(diag(i) - diag(j)) <= tol) {
        const int a = find(i), b = find(j);
        if (a != b) parent[a] = b;
      }
    }
  }
  std::vector<int> label(p);
  for (int i = 0; i < p; ++i) label[i] = find(i);
  return label;
}

Complex phi_first(Complex lambda, Complex s, double alpha, double beta) {
  return (lambda + alpha - 1.0 - alpha * s) * (lambda + beta - 1.0 - beta * s);
}

Complex psi_second(Complex lambda, Complex s, double alpha, double beta, double h) {
  const Complex u = 1.0 - s;
  return lambda * lambda + ((alpha * h + beta) * u - 2.0) * lambda + 1.0 - beta * u;
}

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw std::invalid_argument("epsilon must lie in (0,1)");
  }
}

}  // namespace

double alpha_beta_bound(const Eigen::VectorXcd& spectrum) {
  double bound = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    const Complex s = spectrum(i);
    const double denom = std::norm(1.0 - s);
    if (denom < 1e-24) {
      throw SpectrumOnUnitCircle(
          "eigenvalue 1 in the spectrum: the graph has no spanning tree");
    }
    bound = std::min(bound, (2.0 - 2.0 * s.real()) / denom);
  }
  return bound;
}

double h_bound_second_order(const Eigen::VectorXcd& spectrum, double alpha,
                            double beta) {
  double bound = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    const Complex s = spectrum(i);
    if (std::norm(1.0 - s) < 1e-24) {
      throw SpectrumOnUnitCircle(
          "eigenvalue 1 in the spectrum: the graph has no spanning tree");
    }
    const Complex w = 2.0 / (1.0 - s);
    const double theta = w.real();
    const double vartheta = w.imag();
    if (beta >= theta) {
      throw BetaTooLarge("beta must be below min_i Re(2/(1 - s_i))");
    }
    bound = std::min(bound, 2.0 * beta * beta * (theta - beta) /
                                (alpha * (vartheta * vartheta + beta * beta)));
  }
  return bound;
}

bool is_schur(const Eigen::MatrixXd& A) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(A, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw EigenFailure("eigenvalue iteration did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff() < 1.0 - kSchurTol;
}

bool schur_via_bilinear(const Eigen::VectorXcd& spectrum, double alpha, double beta,
                        double h, DceaOrder order) {
  if (order == DceaOrder::FirstOrder) {
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
      const Complex u = 1.0 - spectrum(i);
      if (std::norm(u) < 1e-24) {
        throw SpectrumOnUnitCircle(
            "eigenvalue 1 in the spectrum: the graph has no spanning tree");
      }
      // Factor roots under lambda = (z+1)/(z-1): z = 1 - 2/(g u), g = alpha, beta.
      const Complex z1 = 1.0 - 2.0 / (alpha * u);
      const Complex z2 = 1.0 - 2.0 / (beta * u);
      if (z1.real() >= 0.0 || z2.real() >= 0.0) return false;
    }
    return true;
  }
  if (!(2.0 * beta / (alpha * h) > 0.0)) return false;
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    const Complex u = 1.0 - spectrum(i);
    if (std::norm(u) < 1e-24) {
      throw SpectrumOnUnitCircle(
          "eigenvalue 1 in the spectrum: the graph has no spanning tree");
    }
    const Complex w = 2.0 / u;
    const double theta = w.real();
    const double vartheta = w.imag();
    const double test =
        beta * beta * (2.0 * (theta - beta) / (alpha * h) - 1.0) - vartheta * vartheta;
    if (test <= 0.0) return false;
  }
  return true;
}

double characteristic_factorization_check(const Topology& t, const DceaConfig& cfg,
                                          int m, int num_probes, std::uint64_t seed) {
  const Eigen::MatrixXd T = estimator_transition_matrix(t, cfg, m);
  const Eigen::VectorXcd spectrum = spectrum_D(t);
  const Eigen::Index p = T.rows();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> radius(1.5, 2.5);

  double worst = 0.0;
  for (int k = 0; k < num_probes; ++k) {
    // Alternate the |lambda| = 2 circle with a surrounding annulus; both
    // stay clear of the unit-disc roots so no cancellation occurs.
    const double r = (k % 2 == 0) ? 2.0 : radius(rng);
    const Complex lambda = std::polar(r, angle(rng));

    Eigen::MatrixXcd shifted = -T.cast<Complex>();
    shifted.diagonal().array() += lambda;
    const Complex lhs = shifted.determinant();

    Complex rhs(1.0, 0.0);
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
      const Complex f = cfg.order == DceaOrder::FirstOrder
                            ? phi_first(lambda, spectrum(i), cfg.alpha, cfg.beta)
                            : psi_second(lambda, spectrum(i), cfg.alpha, cfg.beta, cfg.h);
      for (int j = 0; j < m; ++j) rhs *= f;
    }
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale > 0.0) {
      worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
  }
  (void)p;
  return worst;
}

NormCertificate small_value_norm(const Eigen::MatrixXcd& A, double slack) {
  if (!(slack > 0.0) || slack >= 1.0) {
    throw std::invalid_argument("slack must lie in (0,1)");
  }
  const Eigen::Index p = A.rows();
  if (p != A.cols()) throw std::invalid_argument("matrix must be square");

  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(A, /*computeU=*/true);
  if (schur.info() != Eigen::Success) {
    throw EigenFailure("complex Schur decomposition did not converge");
  }
  Eigen::MatrixXcd T = schur.matrixT();
  Eigen::MatrixXcd U = schur.matrixU();

  const double rho = T.diagonal().cwiseAbs().maxCoeff();
  if (rho >= 1.0 - kSchurTol) {
    throw NotSchur("spectral radius is not below 1");
  }
  const double budget = slack * (1.0 - rho);

  // Group eigenvalues into clusters and bubble the Schur form until each
  // cluster is contiguous. Separation between clusters is at least tol,
  // which keeps the decoupling solves well conditioned.
  const double tol = std::max(0.1 * (1.0 - rho), 1e-8);
  const std::vector<int> labels = cluster_labels(T.diagonal(), tol);
  std::vector<int> rank_of_label(p, -1);
  std::vector<int> key(p);
  {
    int next = 0;
    for (Eigen::Index i = 0; i < p; ++i) {
      if (rank_of_label[labels[i]] < 0) rank_of_label[labels[i]] = next++;
      key[i] = rank_of_label[labels[i]];
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (Eigen::Index k = 0; k + 1 < p; ++k) {
      if (key[k] > key[k + 1]) {
        swap_adjacent(T, U, k);
        std::swap(key[k], key[k + 1]);
        changed = true;
      }
    }
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
  for (Eigen::Index s = 0; s < p;) {
    Eigen::Index e = s + 1;
    while (e < p && key[e] == key[s]) ++e;
    blocks.emplace_back(s, e);
    s = e;
  }

  // Zero the couplings between clusters: for each block, solve the
  // triangular Sylvester equation T11 Z - Z T22 = -T12 against everything
  // before it and absorb Z into V (unit upper-triangular).
  Eigen::MatrixXcd V = Eigen::MatrixXcd::Identity(p, p);
  Eigen::MatrixXcd Vinv = Eigen::MatrixXcd::Identity(p, p);
  for (int bi = static_cast<int>(blocks.size()) - 1; bi >= 1; --bi) {
    const Eigen::Index j0 = blocks[bi].first;
    const Eigen::Index j1 = blocks[bi].second;
    const Eigen::Index lead = j0;
    Eigen::MatrixXcd Z(lead, j1 - j0);
    const auto T11 = T.topLeftCorner(lead, lead);
    const auto T22 = T.block(j0, j0, j1 - j0, j1 - j0);
    const auto T12 = T.block(0, j0, lead, j1 - j0);
    for (Eigen::Index c = 0; c < j1 - j0; ++c) {
      Eigen::VectorXcd rhs = -T12.col(c);
      if (c > 0) rhs += Z.leftCols(c) * T22.col(c).head(c);
      Eigen::MatrixXcd shifted = T11;
      shifted.diagonal().array() -= T22(c, c);
      Z.col(c) = shifted.triangularView<Eigen::Upper>().solve(rhs);
    }
    T.block(0, j0, lead, j1 - j0).setZero();
    Eigen::MatrixXcd Vk = Eigen::MatrixXcd::Identity(p, p);
    Vk.block(0, j0, lead, j1 - j0) = Z;
    Eigen::MatrixXcd Vkinv = Eigen::MatrixXcd::Identity(p, p);
    Vkinv.block(0, j0, lead, j1 - j0) = -Z;
    V = V * Vk;
    Vinv = Vkinv * Vinv;
  }

  // Within each cluster pick the smallest geometric scaling whose strict
  // upper part fits in the budget.
  Eigen::VectorXd sigma = Eigen::VectorXd::Ones(p);
  constexpr double kScaleCap = 1e6;
  for (const auto& [s0, s1] : blocks) {
    const Eigen::Index pb = s1 - s0;
    if (pb == 1) continue;
    const auto upper_contribution = [&](double t) {
      double worst = 0.0;
      for (Eigen::Index i = s0; i < s1; ++i) {
        double row = 0.0;
        for (Eigen::Index j = i + 1; j < s1; ++j) {
          row += std::abs(T(i, j)) * std::pow(t, static_cast<double>(i - j));
        }
        worst = std::max(worst, row);
      }
      return worst;
    };
    double t = 1.0;
    while (upper_contribution(t) > budget) {
      t *= 1.02;
      if (t > kScaleCap) {
        throw ScalingOverflow("cluster scaling exceeds the representable range");
      }
    }
    for (Eigen::Index k = 0; k < pb; ++k) {
      sigma(s0 + k) = std::pow(t, static_cast<double>(k + 1));
    }
  }

  NormCertificate cert;
  cert.transform = sigma.asDiagonal() * (Vinv * U.adjoint());
  cert.inverse_transform = (U * V) * sigma.cwiseInverse().asDiagonal();

  // Honest validation on the stored transform.
  const double inv_residual =
      (cert.transform * cert.inverse_transform - Eigen::MatrixXcd::Identity(p, p))
          .cwiseAbs()
          .maxCoeff();
  cert.induced_norm_value = max_row_sum(cert.transform * A * cert.inverse_transform);
  if (!(cert.induced_norm_value < 1.0) || inv_residual > 1e-7) {
    throw ScalingOverflow("certificate failed direct evaluation");
  }
  cert.b = max_row_sum(cert.inverse_transform);
  cert.c = max_row_sum(cert.transform);
  return cert;
}

NormCertificate small_value_norm(const Eigen::MatrixXd& A, double slack) {
  return small_value_norm(Eigen::MatrixXcd(A.cast<Complex>()), slack);
}

double certified_vector_norm(const NormCertificate& cert, const Eigen::VectorXd& eta) {
  return (cert.transform * eta.cast<Complex>()).cwiseAbs().maxCoeff();
}

RegionEstimates region_estimates(const Topology& t, const DceaConfig& cfg,
                                 const TargetSpec& target, const ModelBounds& bounds,
                                 int m) {
  const Eigen::VectorXcd spectrum = spectrum_D(t);
  const double drive = std::max(2.0 * target.gamma1, target.gamma2);
  const int n = t.n;

  RegionEstimates reg;
  reg.mu1 = Eigen::VectorXd::Constant(
      n, bounds.lambda_d + bounds.lambda_M * target.gamma2 +
             bounds.lambda_c * target.gamma1 * target.gamma1 + bounds.lambda_g);
  reg.varrho1 = Eigen::VectorXd::Zero(n);
  reg.varrho2 = Eigen::VectorXd::Constant(
      n, bounds.lambda_c * std::sqrt(static_cast<double>(m)) * target.gamma1);

  if (cfg.order == DceaOrder::FirstOrder) {
    const double cap = alpha_beta_bound(spectrum);
    if (!(cfg.alpha < cap) || !(cfg.beta < cap)) {
      throw NotSchur("alpha or beta outside the admissible interval");
    }
    // The position-block certificate is built on the h-normalized factor
    // (similar to the true transition matrix under diag(I, h I)), so the
    // resulting kappas carry no h dependence and the radii below are
    // exactly linear in h.
    DceaConfig unit = cfg;
    unit.h = 1.0;
    const NormCertificate certL = small_value_norm(estimator_transition_factor(t, unit));
    const Eigen::MatrixXd P =
        (1.0 - cfg.beta) * Eigen::MatrixXd::Identity(n, n) + cfg.beta * t.D;
    const NormCertificate certP = small_value_norm(P);
    reg.kappa1 = certL.b * certL.c * drive / (1.0 - certL.induced_norm_value);
    reg.kappa2 =
        certP.b * certP.c * target.gamma2 / (1.0 - certP.induced_norm_value);
    reg.delta1 = cfg.h * reg.kappa1;
    reg.delta2 = cfg.h * std::min(reg.kappa1, reg.kappa2);
  } else {
    const double hcap = h_bound_second_order(spectrum, cfg.alpha, cfg.beta);
    if (!(cfg.h < hcap)) {
      throw NotSchur("sampling period exceeds the admissible bound");
    }
    const NormCertificate certG = small_value_norm(estimator_transition_factor(t, cfg));
    reg.kappa3 = certG.b * certG.c * drive / (1.0 - certG.induced_norm_value);
    reg.delta1 = cfg.h * reg.kappa3;
    reg.delta2 = cfg.h * reg.kappa3;
  }

  const double sqrt_m = std::sqrt(static_cast<double>(m));
  reg.gain_hypotheses_ok = true;
  double d_pos = 0.0, d_vel = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(cfg.Kp.at(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ed(cfg.Kd.at(i));
    const double kp_min = ep.eigenvalues().minCoeff();
    const double kp_max = ep.eigenvalues().maxCoeff();
    const double kd_min = ed.eigenvalues().minCoeff();
    const double kd_max = ed.eigenvalues().maxCoeff();
    if (kp_min <= std::max(2.0 * bounds.lambda_M, reg.varrho1(i)) ||
        kd_min <= reg.varrho2(i)) {
      reg.gain_hypotheses_ok = false;
      break;
    }
    const double numer =
        reg.mu1(i) + sqrt_m * (reg.delta1 * kp_max + reg.delta2 * kd_max);
    d_pos = std::max(d_pos, numer / (kp_min - reg.varrho1(i)));
    d_vel = std::max(d_vel, numer / (kd_min - reg.varrho2(i)));
  }
  if (!reg.gain_hypotheses_ok) {
    d_pos = d_vel = std::numeric_limits<double>::infinity();
  }
  if (cfg.order == DceaOrder::FirstOrder) {
    reg.delta3 = d_pos;
    reg.delta4 = d_vel;
  } else {
    reg.delta5 = d_pos;
    reg.delta6 = d_vel;
  }
  return reg;
}

GainDesign design_parameters(double delta_pos, double delta_vel, double epsilon,
                             const Topology& t, const DceaConfig& cfg,
                             const TargetSpec& target, const ModelBounds& bounds,
                             int m) {
  require_epsilon(epsilon);
  if (!(delta_pos > 0) || !(delta_vel > 0)) {
    throw std::invalid_argument("target radii must be positive");
  }
  const RegionEstimates reg = region_estimates(t, cfg, target, bounds, m);
  const double mu1 = reg.mu1.maxCoeff();
  const double r1 = reg.varrho1.maxCoeff();
  const double r2 = reg.varrho2.maxCoeff();

  GainDesign d;
  d.kp_floor = std::max(2.0 * bounds.lambda_M, mu1 / (epsilon * delta_pos) + r1);
  d.kd_floor = mu1 / (epsilon * delta_vel) + r2;
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  double denom;
  if (cfg.order == DceaOrder::FirstOrder) {
    denom = epsilon * sqrt_m *
            (reg.kappa1 * d.kp_floor + std::min(reg.kappa1, reg.kappa2) * d.kd_floor);
  } else {
    denom = epsilon * reg.kappa3 * sqrt_m * (d.kp_floor + d.kd_floor);
  }
  d.h_cap = mu1 * (1.0 - epsilon) / denom;
  if (!std::isfinite(d.h_cap) || !(d.h_cap > 0.0)) {
    throw InfeasibleDesign("required sampling-period cap is not positive");
  }
  return d;
}

StabilityReport make_stability_report(const Topology& t, const DceaConfig& cfg) {
  StabilityReport rep;
  Eigen::VectorXcd spectrum = spectrum_D(t);
  std::vector<Eigen::Index> order(spectrum.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (spectrum(a).real() != spectrum(b).real())
      return spectrum(a).real() < spectrum(b).real();
    return spectrum(a).imag() < spectrum(b).imag();
  });
  rep.spectrum.resize(spectrum.size());
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    rep.spectrum(i) = spectrum(order[i]);
  }

  rep.alpha_beta_bound = alpha_beta_bound(rep.spectrum);
  rep.theta.reserve(rep.spectrum.size());
  rep.vartheta.reserve(rep.spectrum.size());
  double cap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < rep.spectrum.size(); ++i) {
    const Complex w = 2.0 / (1.0 - rep.spectrum(i));
    rep.theta.push_back(w.real());
    rep.vartheta.push_back(w.imag());
    cap = std::min(cap, w.real());
  }
  rep.beta_cap = cap;
  if (cfg.order == DceaOrder::SecondOrder && cfg.beta < cap) {
    rep.h_bound = h_bound_second_order(rep.spectrum, cfg.alpha, cfg.beta);
  }

  DceaConfig first = cfg;
  first.order = DceaOrder::FirstOrder;
  DceaConfig second = cfg;
  second.order = DceaOrder::SecondOrder;
  rep.schur_Lambda = is_schur(estimator_transition_factor(t, first));
  rep.schur_Gamma = is_schur(estimator_transition_factor(t, second));
  return rep;
}

}  // namespace nrs
