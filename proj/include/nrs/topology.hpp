#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace nrs {

struct TopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonSquareError : TopologyError {
  using TopologyError::TopologyError;
};
struct NegativeWeightError : TopologyError {
  using TopologyError::TopologyError;
};
struct NonzeroDiagonalError : TopologyError {
  using TopologyError::TopologyError;
};
// Some robot has no in-edges at all (row sum zero), so the degree matrix
// is singular and the normalized weights are undefined.
struct IsolatedNodeError : TopologyError {
  using TopologyError::TopologyError;
};
struct EigenFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Directed interaction graph over the target (node 0) and n robots.
///
/// W is the full (n+1)x(n+1) adjacency; w_ij > 0 means robot i reads
/// node j. zeta holds the target in-weights w_i0, What the robot-robot
/// block, varpi_i the row sums over all nodes, B = diag(varpi) and
/// D = B^{-1} What. Each row of D sums to 1 - zeta_i / varpi_i, so all
/// entries lie in [0, 1].
struct Topology {
  int n = 0;
  Eigen::MatrixXd W;
  Eigen::VectorXd zeta;
  Eigen::MatrixXd What;
  Eigen::VectorXd varpi;
  Eigen::MatrixXd B;
  Eigen::MatrixXd D;
};

/// Validates W (square, >= 2x2, zero diagonal, nonnegative) and derives
/// zeta, What, varpi, B, D. Throws IsolatedNodeError if any varpi_i = 0.
Topology build_topology(const Eigen::MatrixXd& W);

/// True iff node 0 reaches every robot along the information-flow
/// direction (edge {j,i} carries data from j to i).
bool has_spanning_tree(const Topology& t);

/// All n eigenvalues of D, with multiplicity. When the graph has a
/// spanning tree rooted at the target, every modulus is < 1.
Eigen::VectorXcd spectrum_D(const Topology& t);

}  // namespace nrs
